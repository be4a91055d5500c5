use proptest::prelude::*;

use super::*;
use crate::error::Error;
use crate::series::{MonthlySeries, YearMonth};

fn stable_topology() -> NetworkTopology {
    let mut t = default_topology();
    t.lakes[LakeId::StClair].area_m2 = 5e9;
    t
}

fn levels(v: [f64; 5]) -> PerLake<f64> {
    PerLake(v)
}

const REF_LEVELS: [f64; 5] = [183.16, 175.18, 176.26, 174.06, 74.8];

fn nominal_plan(months: usize) -> ControlPlan {
    ControlPlan::constant(&[RiverId::StMarys, RiverId::StLawrence], months, |r| match r {
        RiverId::StMarys => NOMINAL_ST_MARYS_FLOW,
        _ => NOMINAL_ST_LAWRENCE_FLOW,
    })
}

fn quiet(months: usize) -> Vec<MonthForcing> {
    vec![MonthForcing::from_indicators(PerLake::splat(0.0)); months]
}

#[test]
fn river_flow_examples() {
    let d = FlowFit::new(2.09, -3.5799);
    assert!((river_flow(174.0, &d).unwrap() - 5_670.0).abs() < 1e-6);

    // 1.69e3 * 181.92 = 307_444.8, so the raw flow is 4.8 m3/s rather than 0;
    // the zero crossing sits just below.
    let a = FlowFit::new(1.69, -3.0744);
    assert!((river_flow(181.92, &a).unwrap() - 4.8).abs() < 1e-6);
    assert!((a.zero_flow_level() - 181.917_159).abs() < 1e-5);
    assert_eq!(river_flow(181.90, &a).unwrap(), 0.0);

    assert_eq!(river_flow(0.0, &FlowFit::new(1.5, 0.0)).unwrap(), 0.0);
    assert!(matches!(river_flow(f64::NAN, &a), Err(Error::Domain(_))));
}

proptest! {
    #[test]
    fn river_flow_is_monotone(h1 in 150.0f64..200.0, h2 in 150.0f64..200.0, s in 0.1f64..5.0, i in -5.0f64..0.0) {
        let fit = FlowFit::new(s, i);
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let (flo, fhi) = (river_flow(lo, &fit).unwrap(), river_flow(hi, &fit).unwrap());
        prop_assert!(flo <= fhi);
        if lo > fit.zero_flow_level() && hi > lo {
            prop_assert!(flo < fhi);
        }
    }
}

#[test]
fn zero_flux_leaves_state_unchanged() {
    let mut topo = default_topology();
    for r in RiverId::ALL {
        topo.edges[r].controllable = false;
    }
    let state = LakeState::new(levels(REF_LEVELS));
    let mut forcing = MonthForcing::from_indicators(PerLake::splat(0.0));
    forcing.prescribed = PerRiver::splat(Some(0.0));
    let next = step(&state, &PerRiver::splat(None), &forcing, &topo, &FlowCoefficients::reference()).unwrap();
    assert_eq!(next.levels, state.levels);
    assert_eq!(next.month, 1);
}

#[test]
fn indicator_volume_raises_superior_by_one_centimetre() {
    let topo = default_topology();
    let state = LakeState::new(levels(REF_LEVELS));
    let mut forcing = MonthForcing::from_indicators(PerLake::splat(0.0));
    forcing.prescribed = PerRiver::splat(Some(0.0));
    forcing.indicators[LakeId::Superior] = 8.21e8;
    let next = step(&state, &nominal_plan(1).slice(0), &forcing, &topo, &FlowCoefficients::reference()).unwrap();
    assert!((next.levels[LakeId::Superior] - (REF_LEVELS[0] + 0.01)).abs() < 1e-12);
    assert_eq!(next.levels[LakeId::Erie], REF_LEVELS[3]);
}

#[test]
fn out_of_bounds_control_is_rejected() {
    let topo = default_topology();
    let state = LakeState::new(levels(REF_LEVELS));
    let mut controls = nominal_plan(1).slice(0);
    controls[RiverId::StMarys] = Some(10_000.0);
    let err = step(&state, &controls, &quiet(1)[0], &topo, &FlowCoefficients::reference()).unwrap_err();
    assert!(matches!(err, Error::ConstraintViolation { .. }));

    let missing = PerRiver::splat(None);
    assert!(step(&state, &missing, &quiet(1)[0], &topo, &FlowCoefficients::reference()).is_err());
}

#[test]
fn horizon_zero_returns_initial_state() {
    let state = LakeState::new(levels(REF_LEVELS));
    let traj = simulate(&state, &nominal_plan(0), &[], &default_topology(), &FlowCoefficients::reference(), 0).unwrap();
    assert_eq!(traj.states, vec![state]);
    assert_eq!(traj.horizon(), 0);
}

/// Indicators that exactly balance rating and dam flows at the given levels.
fn equilibrium_forcing(topo: &NetworkTopology, coefs: &FlowCoefficients, h: &PerLake<f64>) -> MonthForcing {
    let secs = topo.month_seconds();
    let mut flows = PerRiver::splat(0.0);
    for r in RiverId::RATED {
        flows[r] = river_flow(h[topo.source(r).unwrap()], coefs.get(r).unwrap()).unwrap();
    }
    flows[RiverId::StMarys] = NOMINAL_ST_MARYS_FLOW;
    flows[RiverId::StLawrence] = NOMINAL_ST_LAWRENCE_FLOW;
    let mut ind = PerLake::splat(0.0);
    for r in RiverId::ALL {
        if let Some(src) = topo.source(r) {
            ind[src] += flows[r] * secs;
        }
        if let Endpoint::Lake(dst) = topo.edges[r].to {
            ind[dst] -= flows[r] * secs;
        }
    }
    MonthForcing::from_indicators(ind)
}

#[test]
fn equilibrium_controls_hold_levels_constant() {
    let topo = stable_topology();
    let coefs = FlowCoefficients::reference();
    let h = levels(REF_LEVELS);
    let forcing = vec![equilibrium_forcing(&topo, &coefs, &h); 12];
    let traj = simulate(&LakeState::new(h), &nominal_plan(12), &forcing, &topo, &coefs, 12).unwrap();
    for lake in LakeId::ALL {
        for v in traj.levels(lake) {
            assert!((v - h[lake]).abs() < 1e-9, "lake {lake} drifted to {v}");
        }
    }
}

fn diverge_month(a: &Trajectory, b: &Trajectory, lake: LakeId) -> Option<usize> {
    a.states.iter().zip(&b.states).position(|(x, y)| x.levels[lake] != y.levels[lake])
}

#[test]
fn impulse_on_st_marys_propagates_one_month_per_edge() {
    let topo = stable_topology();
    let coefs = FlowCoefficients::reference();
    let h = levels(REF_LEVELS);
    let forcing = vec![equilibrium_forcing(&topo, &coefs, &h); 12];
    let base_plan = nominal_plan(12);
    let t = 3;
    let mut bumped = base_plan.clone();
    bumped.series_mut(RiverId::StMarys).unwrap()[t] += 1_000.0;

    let base = simulate(&LakeState::new(h), &base_plan, &forcing, &topo, &coefs, 12).unwrap();
    let pert = simulate(&LakeState::new(h), &bumped, &forcing, &topo, &coefs, 12).unwrap();

    // States index the start of each month, so state t+1 is the end of month t.
    assert_eq!(base.states[..=t], pert.states[..=t]);
    assert_eq!(diverge_month(&base, &pert, LakeId::Superior), Some(t + 1));
    assert_eq!(diverge_month(&base, &pert, LakeId::MichiganHuron), Some(t + 1));
    assert_eq!(diverge_month(&base, &pert, LakeId::StClair), Some(t + 2));
    assert_eq!(diverge_month(&base, &pert, LakeId::Erie), Some(t + 3));
    assert_eq!(diverge_month(&base, &pert, LakeId::Ontario), Some(t + 4));
}

#[test]
fn simulate_is_deterministic() {
    let topo = stable_topology();
    let coefs = FlowCoefficients::reference();
    let h = levels(REF_LEVELS);
    let mut forcing = vec![equilibrium_forcing(&topo, &coefs, &h); 12];
    for (i, f) in forcing.iter_mut().enumerate() {
        f.indicators[LakeId::Erie] += 1e8 * (i as f64).sin();
    }
    let a = simulate(&LakeState::new(h), &nominal_plan(12), &forcing, &topo, &coefs, 12).unwrap();
    let b = simulate(&LakeState::new(h), &nominal_plan(12), &forcing, &topo, &coefs, 12).unwrap();
    assert_eq!(a, b);
}

fn forcing_strategy() -> impl Strategy<Value = MonthForcing> {
    (
        prop::array::uniform5(-5e10f64..5e10),
        prop::array::uniform6(-500.0f64..500.0),
        prop::option::of(0.0f64..4_000.0),
    )
        .prop_map(|(ind, off, ottawa)| {
            let mut f = MonthForcing::from_indicators(PerLake(ind));
            f.offsets = PerRiver(off);
            f.prescribed[RiverId::Ottawa] = ottawa;
            f
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn step_conserves_volume(
        dh in prop::array::uniform5(-1.5f64..1.5),
        a in 1_050.0f64..=3_150.0,
        e in 3_500.0f64..=10_500.0,
        forcing in forcing_strategy(),
    ) {
        let topo = default_topology();
        let h = PerLake::from_fn(|l| REF_LEVELS[l.index()] + dh[l.index()]);
        let state = LakeState::new(h);
        let mut controls = PerRiver::splat(None);
        controls[RiverId::StMarys] = Some(a);
        controls[RiverId::StLawrence] = Some(e);
        let next = step(&state, &controls, &forcing, &topo, &FlowCoefficients::reference()).unwrap();
        let secs = topo.month_seconds();
        for lake in LakeId::ALL {
            let mut vin = 0.0;
            let mut vout = 0.0;
            for r in RiverId::ALL {
                if topo.source(r) == Some(lake) {
                    vout += next.flows[r] * secs;
                }
                if topo.edges[r].to == Endpoint::Lake(lake) {
                    vin += next.flows[r] * secs;
                }
            }
            let lhs = topo.area(lake) * (next.levels[lake] - state.levels[lake]);
            let rhs = vin - vout + forcing.indicators[lake];
            let scale = vin.abs().max(vout.abs()).max(forcing.indicators[lake].abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * scale,
                "lake {lake}: {lhs} vs {rhs}");
        }
        prop_assert!(next.flows.0.iter().all(|f| *f >= 0.0));
    }

    #[test]
    fn perturbing_month_t_leaves_prefix_bit_identical(t in 0usize..11, bump in -2e9f64..2e9, lake_ix in 0usize..5) {
        prop_assume!(bump != 0.0);
        let topo = stable_topology();
        let coefs = FlowCoefficients::reference();
        let h = levels(REF_LEVELS);
        let base_f = vec![equilibrium_forcing(&topo, &coefs, &h); 12];
        let mut pert_f = base_f.clone();
        let lake = LakeId::ALL[lake_ix];
        pert_f[t].indicators[lake] += bump;
        let a = simulate(&LakeState::new(h), &nominal_plan(12), &base_f, &topo, &coefs, 12).unwrap();
        let b = simulate(&LakeState::new(h), &nominal_plan(12), &pert_f, &topo, &coefs, 12).unwrap();
        prop_assert_eq!(&a.states[..=t], &b.states[..=t]);
        prop_assert_ne!(a.states[t + 1].levels[lake], b.states[t + 1].levels[lake]);
    }
}

#[test]
fn water_level_index_examples() {
    let start = YearMonth::new(2017, 1).unwrap();
    let mut base = [5_400.0; 12];
    let ones = water_level_index(&MonthlySeries::new(start, base.to_vec()), &base).unwrap();
    assert!(ones.values.iter().all(|v| *v == 1.0));

    let r = water_level_index(&MonthlySeries::new(start, vec![7_020.0, 0.0]), &base).unwrap();
    assert!((r.values[0] - 1.3).abs() < 1e-12);
    assert_eq!(r.values[1], 0.0);

    base[4] = 0.0;
    assert!(matches!(
        water_level_index(&MonthlySeries::new(start, vec![1.0]), &base),
        Err(Error::Domain(_))
    ));
}

#[test]
fn montreal_balance_examples() {
    assert_eq!(montreal_balance(9_000.0, 2_000.0, 6_500.0, 300.0, 200.0).unwrap(), 0.0);
    assert_eq!(montreal_balance(9_500.0, 2_000.0, 6_500.0, 300.0, 200.0).unwrap(), 500.0);
    assert_eq!(montreal_balance(8_700.0, 2_000.0, 6_500.0, 300.0, 200.0).unwrap(), -300.0);
    assert!(montreal_balance(f64::NAN, 0.0, 0.0, 0.0, 0.0).is_err());
    assert!(montreal_balance(-1.0, 0.0, 0.0, 0.0, 0.0).is_err());
}

#[test]
fn explicit_gain_flags_the_small_connecting_lake() {
    let coefs = FlowCoefficients::reference();
    let b = coefs.get(RiverId::StClair).unwrap().slope_si();
    assert!(default_topology().explicit_gain(LakeId::MichiganHuron, b) < 2.0);
    let c = coefs.get(RiverId::Detroit).unwrap().slope_si();
    assert!(default_topology().explicit_gain(LakeId::StClair, c) > 2.0);
    assert!(stable_topology().explicit_gain(LakeId::StClair, c) < 2.0);
}
