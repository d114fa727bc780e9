//! Random connected-grid generation for ensemble tests.
//!
//! Construction guarantees the structural invariants by design: load buses
//! are joined by a random spanning tree before any extra lines are added
//! (connectivity), extra lines are deduplicated per unordered pair, and
//! every machine hangs off an existing load bus. Numeric fields are drawn
//! uniformly from the supplied ranges. A seeded ChaCha stream keeps every
//! ensemble reproducible.

#![allow(dead_code)]

use std::collections::HashSet;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rocof_core::grid::{BusId, GeneratorSpec, GridModel, LineSpec};
use rocof_core::rocof::Disturbance;

pub struct GridParams {
    pub machines: RangeInclusive<usize>,
    pub load_buses: RangeInclusive<usize>,
    pub susceptance_pu: RangeInclusive<f64>,
    pub inertia_mws: RangeInclusive<f64>,
    /// `h_max = h0 + headroom`.
    pub headroom_mws: RangeInclusive<f64>,
    pub cost_per_mws: RangeInclusive<f64>,
    /// Expected number of lines beyond the spanning tree, as a fraction of
    /// the load-bus count.
    pub extra_line_fraction: f64,
}

impl GridParams {
    /// Wide-ranging ensemble for structural properties: up to 10 machines,
    /// 40 load buses, susceptances across [0.1, 50] pu.
    pub fn structural() -> Self {
        GridParams {
            machines: 1..=10,
            load_buses: 1..=40,
            susceptance_pu: 0.1..=50.0,
            inertia_mws: 100.0..=10_000.0,
            headroom_mws: 100.0..=5_000.0,
            cost_per_mws: 0.1..=10.0,
            extra_line_fraction: 0.5,
        }
    }

    /// Small, moderately stiff grids for time-domain comparison: the
    /// fastest electromechanical mode must stay well resolved at the
    /// reference step of 1e-4 s.
    pub fn oracle() -> Self {
        GridParams {
            machines: 1..=5,
            load_buses: 1..=10,
            susceptance_pu: 0.5..=10.0,
            inertia_mws: 500.0..=5_000.0,
            headroom_mws: 100.0..=2_000.0,
            cost_per_mws: 0.5..=5.0,
            extra_line_fraction: 0.4,
        }
    }

    /// Tiny instances (at most three machines) with coarse headroom, small
    /// enough for an exhaustive lattice search over awards.
    pub fn lattice() -> Self {
        GridParams {
            machines: 1..=3,
            load_buses: 1..=3,
            susceptance_pu: 1.0..=10.0,
            inertia_mws: 200.0..=800.0,
            headroom_mws: 40.0..=60.0,
            cost_per_mws: 1.0..=5.0,
            extra_line_fraction: 0.3,
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut ChaCha8Rng, p: &GridParams) -> GridModel {
    let n = rng.gen_range(p.machines.clone());
    let m = rng.gen_range(p.load_buses.clone());

    let load_buses: Vec<BusId> = (1..=m).map(|j| BusId::new(format!("L{j}"))).collect();

    // Spanning tree over load buses, then extra deduplicated lines.
    let mut lines = Vec::new();
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    for j in 1..m {
        let k = rng.gen_range(0..j);
        used.insert((k, j));
        lines.push(LineSpec {
            from: load_buses[k].clone(),
            to: load_buses[j].clone(),
            b_pu: rng.gen_range(p.susceptance_pu.clone()),
        });
    }
    if m >= 2 {
        let extra = (p.extra_line_fraction * m as f64).round() as usize;
        for _ in 0..extra {
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            let key = (a.min(b), a.max(b));
            if a != b && used.insert(key) {
                lines.push(LineSpec {
                    from: load_buses[key.0].clone(),
                    to: load_buses[key.1].clone(),
                    b_pu: rng.gen_range(p.susceptance_pu.clone()),
                });
            }
        }
    }

    let generators: Vec<GeneratorSpec> = (1..=n)
        .map(|i| {
            let h0 = rng.gen_range(p.inertia_mws.clone());
            GeneratorSpec {
                id: BusId::new(format!("G{i}")),
                terminal: load_buses[rng.gen_range(0..m)].clone(),
                h0_mws: h0,
                h_max_mws: h0 + rng.gen_range(p.headroom_mws.clone()),
                b_internal_pu: rng.gen_range(p.susceptance_pu.clone()),
                cost_per_mws: rng.gen_range(p.cost_per_mws.clone()),
            }
        })
        .collect();

    GridModel {
        f0_hz: if rng.gen_bool(0.5) { 50.0 } else { 60.0 },
        s_base_mva: 100.0,
        load_buses,
        generators,
        lines,
    }
}

/// A load step at a uniformly chosen load bus.
pub fn random_disturbance(
    rng: &mut ChaCha8Rng,
    grid: &GridModel,
    mw: RangeInclusive<f64>,
) -> Disturbance {
    let bus = grid.load_buses[rng.gen_range(0..grid.load_buses.len())].clone();
    Disturbance {
        bus,
        p_dis_mw: rng.gen_range(mw),
    }
}
