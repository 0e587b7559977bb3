//! Adam with one state bucket per parameter group, so the generator and
//! each discriminator keep independent step counts and moment estimates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nets::{Group, NetworkBundle};
use crate::tensor::Scalar;

/// Denominator guard in the parameter update.
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
struct Moments<S> {
    m: Vec<S>,
    v: Vec<S>,
}

#[derive(Clone, Debug)]
struct GroupState<S> {
    t: u64,
    by_name: BTreeMap<String, Moments<S>>,
}

impl<S> Default for GroupState<S> {
    fn default() -> Self {
        GroupState {
            t: 0,
            by_name: BTreeMap::new(),
        }
    }
}

/// The optimizer. Moment buffers are created lazily on a group's first
/// step, keyed by parameter name, so the struct works for any bundle and
/// survives a round-trip through checkpoint arrays.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    beta1: f64,
    beta2: f64,
    groups: BTreeMap<String, GroupState<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(betas: (f64, f64)) -> Result<Self> {
        for (name, b) in [("beta1", betas.0), ("beta2", betas.1)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!(
                    "adam {name} must lie in [0, 1), got {b}"
                )));
            }
        }
        Ok(Adam {
            beta1: betas.0,
            beta2: betas.1,
            groups: BTreeMap::new(),
        })
    }

    /// Completed steps for one group.
    pub fn t(&self, group: Group) -> u64 {
        self.groups.get(group.name()).map_or(0, |g| g.t)
    }

    /// One bias-corrected update over every parameter in `group`. A
    /// parameter whose gradient and moments are all zero is left bitwise
    /// untouched, which is what lets an unused component share a group
    /// with trained ones.
    pub fn step(&mut self, bundle: &mut NetworkBundle<S>, group: Group, lr: f64) {
        let gs = self.groups.entry(group.name().to_string()).or_default();
        gs.t += 1;
        let inv_bc1 = S::from_f64(1.0 / (1.0 - self.beta1.powf(gs.t as f64)));
        let inv_bc2 = S::from_f64(1.0 / (1.0 - self.beta2.powf(gs.t as f64)));
        let b1 = S::from_f64(self.beta1);
        let b2 = S::from_f64(self.beta2);
        let r1 = S::one() - b1;
        let r2 = S::one() - b2;
        let eps = S::from_f64(ADAM_EPS);
        let step = S::from_f64(lr);
        bundle.visit_group(group, &mut |name, p| {
            let mom = gs.by_name.entry(name).or_insert_with(|| Moments {
                m: vec![S::zero(); p.len()],
                v: vec![S::zero(); p.len()],
            });
            for i in 0..p.len() {
                let g = p.g[i];
                let m = b1 * mom.m[i] + r1 * g;
                let v = b2 * mom.v[i] + r2 * g * g;
                mom.m[i] = m;
                mom.v[i] = v;
                p.v[i] = p.v[i] - step * (m * inv_bc1) / ((v * inv_bc2).sqrt() + eps);
            }
        });
    }

    /// Flatten state into checkpoint form: moment arrays keyed
    /// `group/m/name` and `group/v/name`, plus step counts per group.
    pub fn export(&self) -> (BTreeMap<String, Vec<f32>>, BTreeMap<String, u64>) {
        let mut opt = BTreeMap::new();
        let mut adam_t = BTreeMap::new();
        for (gname, gs) in &self.groups {
            adam_t.insert(gname.clone(), gs.t);
            for (pname, mom) in &gs.by_name {
                let f32s = |xs: &[S]| xs.iter().map(|v| v.into_f64() as f32).collect();
                opt.insert(format!("{gname}/m/{pname}"), f32s(&mom.m));
                opt.insert(format!("{gname}/v/{pname}"), f32s(&mom.v));
            }
        }
        (opt, adam_t)
    }

    /// Rebuild state from checkpoint arrays, replacing whatever this
    /// optimizer held. Groups absent from `adam_t` start fresh; everything
    /// present must line up with the bundle — a group that has stepped
    /// needs a correctly sized m and v array for each of its parameters,
    /// and stray keys are rejected. All problems are reported together.
    pub fn import(
        &mut self,
        bundle: &mut NetworkBundle<S>,
        opt: &BTreeMap<String, Vec<f32>>,
        adam_t: &BTreeMap<String, u64>,
    ) -> Result<()> {
        let mut lens: BTreeMap<String, usize> = BTreeMap::new();
        for group in Group::ALL {
            bundle.visit_group(group, &mut |name, p| {
                lens.insert(format!("{}/{name}", group.name()), p.len());
            });
        }

        let mut problems = Vec::new();
        self.groups.clear();
        for (gname, &t) in adam_t {
            if Group::ALL.iter().any(|g| g.name() == gname) {
                self.groups.entry(gname.clone()).or_default().t = t;
            } else {
                problems.push(format!("step count for unknown group {gname}"));
            }
        }

        let mut halves: BTreeMap<String, (Option<Vec<S>>, Option<Vec<S>>)> = BTreeMap::new();
        for (key, vals) in opt {
            let mut parts = key.splitn(3, '/');
            let (gname, kind, pname) = match (parts.next(), parts.next(), parts.next()) {
                (Some(g), Some(k @ ("m" | "v")), Some(p)) => (g, k, p),
                _ => {
                    problems.push(format!("malformed optimizer key {key}"));
                    continue;
                }
            };
            let slot = format!("{gname}/{pname}");
            match lens.get(&slot) {
                None => problems.push(format!("optimizer key {key} matches no parameter")),
                Some(&len) if len != vals.len() => problems.push(format!(
                    "optimizer key {key} has {} values, parameter has {len}",
                    vals.len()
                )),
                Some(_) => {
                    let arr: Vec<S> = vals.iter().map(|&v| S::from_f64(v as f64)).collect();
                    let entry = halves.entry(slot).or_default();
                    match kind {
                        "m" => entry.0 = Some(arr),
                        _ => entry.1 = Some(arr),
                    }
                }
            }
        }
        for (slot, pair) in halves {
            let (gname, pname) = slot.split_once('/').expect("slot built with separator");
            match pair {
                (Some(m), Some(v)) => {
                    let gs = self.groups.entry(gname.to_string()).or_default();
                    gs.by_name.insert(pname.to_string(), Moments { m, v });
                }
                _ => problems.push(format!("parameter {slot} is missing one moment array")),
            }
        }

        // A group that has stepped must carry moments for every parameter.
        for (gname, gs) in &self.groups {
            if gs.t == 0 {
                continue;
            }
            for slot in lens.keys() {
                let (g, pname) = slot.split_once('/').expect("slot built with separator");
                if g == gname && !gs.by_name.contains_key(pname) {
                    problems.push(format!("stepped group {gname} lacks moments for {pname}"));
                }
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "optimizer state does not match the model:\n  {}",
                problems.join("\n  ")
            )))
        }
    }
}
