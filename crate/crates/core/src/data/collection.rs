use std::fmt;

use crate::data::tensor::{unfold_to_matrices, MaskedTensor3};
use crate::scalar::Scalar;

/// One named view of a coupled collection.
#[derive(Clone, Debug, PartialEq)]
pub struct View<F> {
    pub name: String,
    pub data: MaskedTensor3<F>,
}

impl<F: Scalar> View<F> {
    pub fn new(name: impl Into<String>, data: MaskedTensor3<F>) -> Self {
        Self {
            name: name.into(),
            data,
        }
    }
}

/// Views coupled on the sample mode. Tensor views listed together in a
/// third-mode group share one `U` matrix; tensor views not listed anywhere
/// get a private group.
#[derive(Clone, Debug, PartialEq)]
pub struct Collection<F> {
    views: Vec<View<F>>,
    groups: Vec<Vec<usize>>,
}

/// A broken collection invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoViews,
    FirstModeMismatch { view: usize, expected: usize, found: usize },
    MatrixInGroup { view: usize, group: usize },
    UnknownView { view: usize, group: usize },
    ViewInSeveralGroups { view: usize },
    SlabMismatch { view: usize, group: usize, expected: usize, found: usize },
    EmptyGroup { group: usize },
    NothingObserved { view: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoViews => write!(f, "collection has no views"),
            Violation::FirstModeMismatch {
                view,
                expected,
                found,
            } => write!(
                f,
                "first-mode mismatch view {view} (expected N={expected}, found {found})"
            ),
            Violation::MatrixInGroup { view, group } => {
                write!(f, "matrix in U-group: view {view} in group {group}")
            }
            Violation::UnknownView { view, group } => {
                write!(f, "group {group} lists unknown view {view}")
            }
            Violation::ViewInSeveralGroups { view } => {
                write!(f, "view {view} is listed in more than one U-group")
            }
            Violation::SlabMismatch {
                view,
                group,
                expected,
                found,
            } => write!(
                f,
                "third-mode mismatch view {view} in group {group} (expected L={expected}, found {found})"
            ),
            Violation::EmptyGroup { group } => write!(f, "U-group {group} is empty"),
            Violation::NothingObserved { view } => {
                write!(f, "view {view} has no observed entries")
            }
        }
    }
}

impl<F: Scalar> Collection<F> {
    /// Assembles a collection without checking it; see [`Collection::validate`].
    pub fn new(views: Vec<View<F>>, groups: Vec<Vec<usize>>) -> Self {
        Self { views, groups }
    }

    /// Every tensor view gets its own third-mode group.
    pub fn ungrouped(views: Vec<View<F>>) -> Self {
        Self::new(views, Vec::new())
    }

    pub fn views(&self) -> &[View<F>] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [View<F>] {
        &mut self.views
    }

    pub fn view(&self, t: usize) -> &View<F> {
        &self.views[t]
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_samples(&self) -> usize {
        self.views.first().map_or(0, |v| v.data.n_samples())
    }

    pub fn declared_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_collection(self)
    }

    /// Full partition of tensor views into third-mode groups: declared groups
    /// first, then one singleton per undeclared tensor view in view order.
    pub fn u_groups(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .groups
            .iter()
            .map(|g| g.iter().copied().filter(|&t| t < self.views.len()).collect())
            .collect();
        for (t, v) in self.views.iter().enumerate() {
            if !v.data.is_matrix() && !self.groups.iter().any(|g| g.contains(&t)) {
                out.push(vec![t]);
            }
        }
        out
    }

    /// Group index of every view in [`Collection::u_groups`] order; `None` for
    /// matrices.
    pub fn group_index(&self) -> Vec<Option<usize>> {
        let mut idx = vec![None; self.views.len()];
        for (g, members) in self.u_groups().iter().enumerate() {
            for &t in members {
                if !self.views[t].data.is_matrix() {
                    idx[t] = Some(g);
                }
            }
        }
        idx
    }

    /// Replaces every tensor view by its `L` slabs. Returns the all-matrix
    /// collection and, per new view, the `(view, slab)` it came from.
    pub fn unfold_tensors(&self) -> (Collection<F>, Vec<(usize, usize)>) {
        let mut views = Vec::new();
        let mut origin = Vec::new();
        for (t, v) in self.views.iter().enumerate() {
            if v.data.is_matrix() {
                views.push(v.clone());
                origin.push((t, 0));
            } else {
                for (s, m) in unfold_to_matrices(&v.data).into_iter().enumerate() {
                    views.push(View::new(format!("{}[{s}]", v.name), m));
                    origin.push((t, s));
                }
            }
        }
        (Collection::ungrouped(views), origin)
    }

    /// Number of observed entries per view.
    pub fn observed_counts(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.data.n_observed()).collect()
    }
}

/// Checks the coupling and grouping invariants. An empty list means the
/// collection is usable.
pub fn validate_collection<F: Scalar>(c: &Collection<F>) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some(first) = c.views.first() else {
        out.push(Violation::NoViews);
        return out;
    };
    let n = first.data.n_samples();
    for (t, v) in c.views.iter().enumerate() {
        if v.data.n_samples() != n {
            out.push(Violation::FirstModeMismatch {
                view: t,
                expected: n,
                found: v.data.n_samples(),
            });
        }
        if v.data.n_observed() == 0 {
            out.push(Violation::NothingObserved { view: t });
        }
    }
    let mut seen = vec![false; c.views.len()];
    for (g, members) in c.groups.iter().enumerate() {
        if members.is_empty() {
            out.push(Violation::EmptyGroup { group: g });
        }
        let mut slabs = None;
        for &t in members {
            let Some(v) = c.views.get(t) else {
                out.push(Violation::UnknownView { view: t, group: g });
                continue;
            };
            if seen[t] {
                out.push(Violation::ViewInSeveralGroups { view: t });
            }
            seen[t] = true;
            if v.data.is_matrix() {
                out.push(Violation::MatrixInGroup { view: t, group: g });
                continue;
            }
            match slabs {
                None => slabs = Some(v.data.n_slabs()),
                Some(l) if l != v.data.n_slabs() => out.push(Violation::SlabMismatch {
                    view: t,
                    group: g,
                    expected: l,
                    found: v.data.n_slabs(),
                }),
                Some(_) => {}
            }
        }
    }
    out
}
