mod support;

use hetcache::closed_form::threshold_allocation;
use hetcache::model::{MemoryConstraint, ProblemInstance, RateProfile};
use hetcache::scheme::{build_for, build_o1, build_o2, Delivery, SchemeModel, SchemeSolution, VarKey};
use hetcache::subset::UserSet;
use hetcache::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{close, random_rates, reference_rates};

fn example1() -> ProblemInstance {
    ProblemInstance::with_memories(3, &[0.2, 0.3, 0.8], &[0.1, 0.2, 0.6]).unwrap()
}

fn o1_load(rates: &RateProfile, m_tot: f64) -> f64 {
    let inst = ProblemInstance::with_budget(rates.users(), rates.rates(), m_tot).unwrap();
    build_o1(&inst).unwrap().solve().unwrap().objective
}

fn set(labels: &[usize]) -> UserSet {
    UserSet::from_labels(labels)
}

#[test]
fn example1_joint_optimum() {
    let sol = build_o2(&example1()).unwrap().solve().unwrap();
    assert!(close(sol.objective, 0.2, 1e-6), "{}", sol.objective);
}

#[test]
fn example1_hand_built_scheme_is_feasible_and_optimal() {
    let model = build_o2(&example1()).unwrap();
    let mut x = vec![0.0; model.index.len()];
    let mut put = |key: VarKey, v: f64| x[model.index.get(&key).unwrap_or_else(|| panic!("{key}"))] = v;
    put(VarKey::Alloc { layer: 0, set: set(&[3]) }, 0.1);
    put(VarKey::Alloc { layer: 0, set: set(&[1, 2]) }, 0.1);
    put(VarKey::Alloc { layer: 1, set: set(&[2]) }, 0.1);
    put(VarKey::Alloc { layer: 2, set: set(&[3]) }, 0.5);
    // X_{1,3}: user 1 gets a piece cached at {3}, user 3 a piece cached at {1,2}
    put(VarKey::Assign { layer: 0, target: set(&[1, 3]), cached: set(&[3]) }, 0.1);
    put(VarKey::Assign { layer: 0, target: set(&[1, 3]), cached: set(&[1, 2]) }, 0.1);
    // X_{2,3}: user 2 gets layer 1 cached at {3}, user 3 gets layer 2 cached at {2}
    put(VarKey::Assign { layer: 0, target: set(&[2, 3]), cached: set(&[3]) }, 0.1);
    put(VarKey::Assign { layer: 1, target: set(&[2, 3]), cached: set(&[2]) }, 0.1);
    put(VarKey::Multicast { layer: None, target: set(&[1, 3]) }, 0.1);
    put(VarKey::Multicast { layer: None, target: set(&[2, 3]) }, 0.1);
    put(VarKey::LayerMem { user: 0, layer: 0 }, 0.1);
    put(VarKey::LayerMem { user: 1, layer: 0 }, 0.1);
    put(VarKey::LayerMem { user: 1, layer: 1 }, 0.1);
    put(VarKey::LayerMem { user: 2, layer: 0 }, 0.1);
    put(VarKey::LayerMem { user: 2, layer: 2 }, 0.5);

    let lp = model.to_lp();
    assert!(lp.max_violation(&x) < 1e-12, "hand-built scheme violates the LP");
    for row in model.all_rows() {
        assert!(row.violation(&x) < 1e-12, "{}", row.label);
    }
    assert!(close(lp.objective_value(&x), 0.2, 1e-12));
}

#[test]
fn example1_intra_layer_gap() {
    let joint = build_o2(&example1()).unwrap().solve().unwrap().objective;
    let intra = build_for(&example1(), Delivery::IntraLayer).unwrap().solve().unwrap().objective;
    assert!(close(intra, 0.216667, 1e-4), "{intra}");
    assert!(intra > joint + 0.01);
}

#[test]
fn budget_optimum_at_reference_budgets() {
    let r = reference_rates();
    for (m, want) in [(0.0, 2.2), (0.5, 1.2), (1.0, 0.6), (1.5, 0.8 / 3.0), (2.2, 0.0)] {
        let got = o1_load(&r, m);
        assert!(close(got, want, 1e-6), "m_tot = {m}: {got} vs {want}");
    }
}

#[test]
fn budget_optimum_is_decreasing_and_convex() {
    let r = reference_rates();
    let grid: Vec<f64> = (0..=22).map(|i| 0.1 * i as f64).collect();
    let loads: Vec<f64> = grid.iter().map(|&m| o1_load(&r, m.min(2.2))).collect();
    for w in loads.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
    for w in loads.windows(3).take(20) {
        assert!(w[1] <= 0.5 * (w[0] + w[2]) + 1e-9);
    }
}

#[test]
fn fixed_memories_from_threshold_allocation_reach_budget_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let profiles = [reference_rates(), random_rates(&mut rng, 4)];
    for r in &profiles {
        let total = r.total_rate();
        for i in 0..=10 {
            let m_tot = total * i as f64 / 10.0;
            let m = threshold_allocation(m_tot, r).unwrap().per_user;
            let inst = ProblemInstance::with_memories(r.users(), r.rates(), &m).unwrap();
            let o2 = build_o2(&inst).unwrap().solve().unwrap().objective;
            let o1 = o1_load(r, m_tot);
            assert!(close(o2, o1, 1e-7), "{:?} m_tot = {m_tot}: O2 {o2} vs O1 {o1}", r.rates());
        }
    }
}

#[test]
fn intra_layer_never_beats_joint() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..12 {
        let k = rng.gen_range(2..=3);
        let r = random_rates(&mut rng, k);
        let m: Vec<f64> = r.rates().iter().map(|&rk| rk * rng.gen_range(0.0..1.0)).collect();
        let inst = ProblemInstance::with_memories(k, r.rates(), &m).unwrap();
        let joint = build_o2(&inst).unwrap().solve().unwrap().objective;
        let intra = build_for(&inst, Delivery::IntraLayer).unwrap().solve().unwrap().objective;
        assert!(intra >= joint - 1e-8, "{m:?}: intra {intra} < joint {joint}");
    }
}

#[test]
fn multicasts_serve_every_recipient_equally() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..6 {
        let r = random_rates(&mut rng, 3);
        let inst = ProblemInstance::with_budget(3, r.rates(), rng.gen_range(0.0..r.total_rate())).unwrap();
        let sol = build_o1(&inst).unwrap().solve().unwrap();
        assert!(sol.structural_gap() < 1e-9);
    }
    let sol = build_o2(&example1()).unwrap().solve().unwrap();
    assert!(sol.structural_gap() < 1e-9);
}

#[test]
fn no_memory_means_full_unicast() {
    let inst = ProblemInstance::with_memories(2, &[0.4, 0.9], &[0.0, 0.0]).unwrap();
    let sol = build_o2(&inst).unwrap().solve().unwrap();
    assert!(close(sol.objective, 1.3, 1e-9));
}

#[test]
fn per_user_memories_respect_the_budget() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 1.25).unwrap();
    let sol = build_o1(&inst).unwrap().solve().unwrap();
    let m = sol.user_memories();
    assert!(m.iter().sum::<f64>() <= 1.25 + 1e-9);
    for (mk, rk) in m.iter().zip([0.5, 0.7, 1.0]) {
        assert!(*mk <= rk + 1e-9);
    }
}

#[test]
fn scheme_json_round_trips() {
    let sol = build_o2(&example1()).unwrap().solve().unwrap();
    let back = SchemeSolution::from_json(&sol.to_json()).unwrap();
    assert_eq!(back, sol);
}

#[test]
fn invalid_instances_are_rejected_before_building() {
    let bad = ProblemInstance { constraint: MemoryConstraint::Fixed(vec![0.3, 0.2, 0.6]), ..example1() };
    assert!(matches!(build_o2(&bad), Err(Error::Invalid(_))));
    let budget = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 1.0).unwrap();
    assert!(build_o2(&budget).is_err());
    assert!(build_o1(&example1()).is_err());
}

#[test]
fn too_many_users_is_a_domain_error() {
    let r = RateProfile::new(&[0.5; 11]).unwrap();
    assert!(matches!(
        SchemeModel::new(&r, (0..11).collect(), Delivery::Joint, hetcache::scheme::MemoryMode::Budget(0.0)),
        Err(Error::Domain(_))
    ));
}
