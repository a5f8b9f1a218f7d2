use std::fmt;

use crate::chain::PosteriorSamples;
use crate::diag::geweke_z_default;
use crate::mtf::{classify_components, merge_activity, ComponentStructure, MtfState};
use crate::rmtf::RmtfState;
use crate::scalar::Scalar;

/// What a run summary needs from a snapshot.
pub trait RunState<F: Scalar> {
    /// `[view][component]` activity.
    fn activity(&self) -> Vec<Vec<bool>>;
    /// Slab-similarity precisions, if the model has any.
    fn lambda(&self) -> Option<&[F]> {
        None
    }
}

impl<F: Scalar> RunState<F> for MtfState<F> {
    fn activity(&self) -> Vec<Vec<bool>> {
        self.h.clone()
    }
}

impl<F: Scalar> RunState<F> for RmtfState<F> {
    fn activity(&self) -> Vec<Vec<bool>> {
        RmtfState::activity(self)
    }
    fn lambda(&self) -> Option<&[F]> {
        Some(&self.lambda)
    }
}

/// Geweke score of one post-burn-in trace; `z` is `None` when the trace is
/// too short or constant.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceCheck {
    pub name: String,
    pub z: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub chain: usize,
    pub traces: Vec<TraceCheck>,
    pub structure: ComponentStructure,
    /// `K` minus the number of components empty in every view.
    pub effective_cardinality: usize,
    /// Posterior mean and standard deviation of each `λ` entry.
    pub lambda: Option<Vec<(f64, f64)>>,
}

impl RunSummary {
    pub fn flagged(&self) -> bool {
        self.traces.iter().any(|t| t.flagged)
    }
}

/// Shared / specific / empty counts from per-snapshot activity: a component
/// is active in a view when its posterior activity exceeds `threshold`.
pub fn structure_of<F: Scalar, S: RunState<F>>(
    snapshots: &[S],
    threshold: f64,
    origin: Option<&[usize]>,
) -> ComponentStructure {
    let Some(first) = snapshots.first() else {
        return ComponentStructure {
            shared: 0,
            specific: Vec::new(),
            empty: 0,
        };
    };
    let first = first.activity();
    let mut mean: Vec<Vec<f64>> = first.iter().map(|r| vec![0.0; r.len()]).collect();
    for s in snapshots {
        for (row, acts) in mean.iter_mut().zip(s.activity()) {
            for (m, a) in row.iter_mut().zip(acts) {
                if a {
                    *m += 1.0;
                }
            }
        }
    }
    let n = snapshots.len() as f64;
    let active: Vec<Vec<bool>> = mean
        .iter()
        .map(|row| row.iter().map(|&m| m / n > threshold).collect())
        .collect();
    classify_components(&merge_activity(&active, origin))
}

/// Geweke scores of the log-joint and per-view training MSE traces after
/// burn-in, component structure, effective cardinality and the `λ` posterior.
/// Any trace with `|z| > 2`, or too short to score, is flagged.
pub fn summarize_run<F: Scalar, S: RunState<F>>(samples: &PosteriorSamples<S, F>) -> RunSummary {
    let burn = samples.schedule.burn_in;
    let tr = &samples.trace;
    let keep: Vec<usize> = (0..tr.len()).filter(|&i| tr.sweeps[i] > burn).collect();
    let mut series: Vec<(String, Vec<f64>)> = vec![(
        "log_joint".into(),
        keep.iter().map(|&i| tr.log_joint[i].to_f64_lossy()).collect(),
    )];
    let n_views = tr.mse.first().map_or(0, Vec::len);
    for t in 0..n_views {
        series.push((
            format!("mse_view{t}"),
            keep.iter().map(|&i| tr.mse[i][t].to_f64_lossy()).collect(),
        ));
    }
    let traces = series
        .into_iter()
        .map(|(name, x)| {
            let z = geweke_z_default(&x).ok().filter(|z| z.is_finite());
            let flagged = z.is_none_or(|z| z.abs() > 2.0);
            TraceCheck { name, z, flagged }
        })
        .collect();
    let structure = structure_of(&samples.snapshots, 0.5, None);
    let k = structure.shared + structure.specific.iter().sum::<usize>() + structure.empty;
    let lambda = samples.snapshots.first().and_then(|s| s.lambda()).map(|first| {
        (0..first.len())
            .map(|j| {
                let xs: Vec<f64> = samples
                    .snapshots
                    .iter()
                    .filter_map(|s| s.lambda().map(|l| l[j].to_f64_lossy()))
                    .collect();
                let n = xs.len() as f64;
                let m = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                (m, var.sqrt())
            })
            .collect()
    });
    RunSummary {
        chain: samples.chain,
        traces,
        effective_cardinality: k - structure.empty,
        structure,
        lambda,
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[chain.{}]", self.chain)?;
        writeln!(f, "flagged = {}", self.flagged())?;
        writeln!(f, "shared = {}", self.structure.shared)?;
        writeln!(f, "specific = {:?}", self.structure.specific)?;
        writeln!(f, "empty = {}", self.structure.empty)?;
        writeln!(f, "effective_cardinality = {}", self.effective_cardinality)?;
        if let Some(l) = &self.lambda {
            let means: Vec<String> = l.iter().map(|(m, _)| format!("{m:e}")).collect();
            let sds: Vec<String> = l.iter().map(|(_, s)| format!("{s:e}")).collect();
            writeln!(f, "lambda_mean = [{}]", means.join(", "))?;
            writeln!(f, "lambda_sd = [{}]", sds.join(", "))?;
        }
        for t in &self.traces {
            let z = t.z.map_or("nan".to_string(), |z| format!("{z:e}"));
            writeln!(f, "geweke.{} = {{ z = {z}, flagged = {} }}", t.name, t.flagged)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{run_chain, HyperParams, Schedule};
    use crate::data::{Collection, MaskedTensor3, Tensor3, View};
    use crate::dist::RngStream;
    use crate::mtf::MtfSampler;

    fn data(seed: u64) -> Collection<f64> {
        let mut rng = RngStream::new(seed, 0);
        let z: Vec<f64> = (0..60).map(|_| f64::standard_normal(&mut rng)).collect();
        let mut view = |l: usize| {
            let v: Vec<f64> = (0..6).map(|_| f64::standard_normal(&mut rng)).collect();
            let x = Tensor3::from_fn(60, 6, l, |i, d, s| {
                z[i] * v[d] * (1.0 + s as f64)
            });
            let noise: Vec<f64> = (0..x.len()).map(|_| 0.5 * f64::standard_normal(&mut rng)).collect();
            let vals: Vec<f64> = x.as_slice().iter().zip(&noise).map(|(a, b)| a + b).collect();
            MaskedTensor3::fully_observed(Tensor3::from_raw(60, 6, l, vals).unwrap())
        };
        let m = view(1);
        let t = view(3);
        Collection::ungrouped(vec![View::new("m", m), View::new("t", t)])
    }

    #[test]
    fn short_run_is_flagged() {
        let c = data(1);
        let mut s = MtfSampler::new(&c, HyperParams::new(3)).unwrap();
        let ps = run_chain(&mut s, Schedule::new(0, 10, 1).unwrap(), &mut RngStream::new(2, 0), 0).unwrap();
        let r = summarize_run(&ps);
        assert!(r.flagged());
        assert!(r.traces.iter().all(|t| t.z.is_none()));
    }

    #[test]
    fn converged_run_is_not_flagged() {
        let c = data(3);
        let mut s = MtfSampler::new(&c, HyperParams::new(3)).unwrap();
        let ps = run_chain(&mut s, Schedule::new(300, 400, 1).unwrap(), &mut RngStream::new(4, 0), 0).unwrap();
        let r = summarize_run(&ps);
        assert!(!r.flagged(), "{r}");
        assert_eq!(r.structure.shared, 1);
        assert!(r.lambda.is_none());
    }

    #[test]
    fn effective_cardinality_counts_nonempty() {
        let c = data(5);
        let s = MtfSampler::new(&c, HyperParams::new(10)).unwrap();
        let mut st = s.init_state(&mut RngStream::new(6, 0)).unwrap();
        for k in 6..10 {
            st.h[0][k] = false;
            st.h[1][k] = false;
        }
        st.h[1][0] = false;
        let ps = PosteriorSamples {
            chain: 0,
            schedule: Schedule::new(0, 2, 1).unwrap(),
            snapshots: vec![st.clone(), st],
            sweeps: vec![1, 2],
            trace: Default::default(),
        };
        let r = summarize_run(&ps);
        assert_eq!(r.effective_cardinality, 6);
        assert_eq!(r.structure.empty, 4);
        assert_eq!(r.structure.specific, vec![1, 0]);
    }

    #[test]
    fn relaxed_summary_reports_lambda() {
        let c = data(7);
        let mut s = crate::rmtf::RmtfSampler::new(&c, HyperParams::new(2)).unwrap();
        let ps = run_chain(&mut s, Schedule::new(20, 30, 1).unwrap(), &mut RngStream::new(8, 0), 0).unwrap();
        let r = summarize_run(&ps);
        let l = r.lambda.as_ref().unwrap();
        assert_eq!(l.len(), 1);
        assert!(l[0].0 > 0.0);
        assert!(r.to_string().contains("lambda_mean"));
    }
}
