//! Method tags naming the baseline configurations.
//!
//! A tag combines a solver (`SVM` or `LS`), a regularizer (none, `Lap`, `Hes`)
//! and a view mode: `SVM`/`KLS`, `LapSVM`, `HesLS` use a single view
//! (written `HesLS@view`); `Con*` and `*C*` concatenate views; `Ave*` and `*A*`
//! average kernels with uniform weights; `mHes*` and `mLap*` learn θ and β.

use std::fmt;
use std::str::FromStr;

use crate::manifold::ManifoldKind;
use crate::solvers::{Loss, ViewMode};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Solver {
    Svm,
    Ls,
}

impl Solver {
    pub fn loss(self) -> Loss {
        match self {
            Solver::Svm => Loss::Hinge,
            Solver::Ls => Loss::Squared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MethodTag {
    pub solver: Solver,
    pub regularizer: Option<ManifoldKind>,
    pub mode: ViewMode,
}

impl MethodTag {
    fn stem(&self) -> Option<String> {
        let solver = match self.solver {
            Solver::Svm => "SVM",
            Solver::Ls => "LS",
        };
        let reg = match self.regularizer {
            None => "",
            Some(ManifoldKind::Laplacian) => "Lap",
            Some(ManifoldKind::Hessian) => "Hes",
        };
        Some(match (&self.mode, self.regularizer) {
            (ViewMode::Single(_), None) if self.solver == Solver::Ls => "KLS".to_string(),
            (ViewMode::Single(_), _) => format!("{reg}{solver}"),
            (ViewMode::Concat, None) => format!("Con{solver}"),
            (ViewMode::Concat, Some(_)) => format!("{reg}C{solver}"),
            (ViewMode::Average, None) => format!("Ave{solver}"),
            (ViewMode::Average, Some(_)) => format!("{reg}A{solver}"),
            (ViewMode::Multiview, Some(_)) => format!("m{reg}{solver}"),
            (ViewMode::Multiview, None) => return None,
        })
    }

    fn all_stems() -> Vec<(String, MethodTag)> {
        let mut out = Vec::new();
        for solver in [Solver::Svm, Solver::Ls] {
            for regularizer in [
                None,
                Some(ManifoldKind::Laplacian),
                Some(ManifoldKind::Hessian),
            ] {
                for mode in [
                    ViewMode::Single(String::new()),
                    ViewMode::Concat,
                    ViewMode::Average,
                    ViewMode::Multiview,
                ] {
                    let tag = MethodTag {
                        solver,
                        regularizer,
                        mode,
                    };
                    if let Some(stem) = tag.stem() {
                        out.push((stem, tag));
                    }
                }
            }
        }
        out
    }

    /// Parse a tag. A single-view tag without `@view` is expanded to one tag
    /// per name in `views`.
    pub fn parse_expanded(text: &str, views: &[String]) -> Result<Vec<MethodTag>> {
        let (stem, view) = split_view(text);
        let base = lookup(stem)?;
        match (&base.mode, view) {
            (ViewMode::Single(_), None) => Ok(views
                .iter()
                .map(|v| MethodTag {
                    mode: ViewMode::Single(v.clone()),
                    ..base.clone()
                })
                .collect()),
            _ => {
                let tag: MethodTag = text.parse()?;
                if let ViewMode::Single(v) = &tag.mode {
                    if !views.contains(v) {
                        return Err(Error::Eval(format!(
                            "method '{text}' names unknown view '{v}'"
                        )));
                    }
                }
                Ok(vec![tag])
            }
        }
    }
}

fn split_view(text: &str) -> (&str, Option<&str>) {
    match text.split_once('@') {
        Some((stem, view)) => (stem, Some(view)),
        None => (text, None),
    }
}

fn lookup(stem: &str) -> Result<MethodTag> {
    MethodTag::all_stems()
        .into_iter()
        .find(|(s, _)| s == stem)
        .map(|(_, tag)| tag)
        .ok_or_else(|| Error::Eval(format!("unknown method tag '{stem}'")))
}

impl FromStr for MethodTag {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (stem, view) = split_view(text);
        let mut tag = lookup(stem)?;
        match (&mut tag.mode, view) {
            (ViewMode::Single(name), Some(v)) if !v.is_empty() => *name = v.to_string(),
            (ViewMode::Single(_), _) => {
                return Err(Error::Eval(format!(
                    "single-view method '{stem}' needs '@<view>'"
                )));
            }
            (_, Some(_)) => {
                return Err(Error::Eval(format!(
                    "method '{stem}' uses every view and takes no '@<view>'"
                )));
            }
            (_, None) => {}
        }
        Ok(tag)
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stem = self.stem().expect("constructed tags are valid");
        match &self.mode {
            ViewMode::Single(view) => write!(f, "{stem}@{view}"),
            _ => f.write_str(&stem),
        }
    }
}
