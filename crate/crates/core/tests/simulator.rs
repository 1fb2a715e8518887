mod support;

use hetcache::lp::{LpSolution, LpStatus};
use hetcache::model::ProblemInstance;
use hetcache::scheme::{build_o1, build_o2, extract_scheme, SchemeSolution, VarKey};
use hetcache::simulator::{
    check_user, decode, deliver, layer_bits, place, quantize, redundancy_audit, verify, FileLibrary,
};
use hetcache::subset::UserSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{close, random_rates, reference_rates};

fn example1() -> ProblemInstance {
    ProblemInstance::with_memories(3, &[0.2, 0.3, 0.8], &[0.1, 0.2, 0.6]).unwrap()
}

fn set(labels: &[usize]) -> UserSet {
    UserSet::from_labels(labels)
}

/// The hand-built optimal scheme for the three-user example.
fn hand_built_scheme() -> SchemeSolution {
    let model = build_o2(&example1()).unwrap();
    let mut x = vec![0.0; model.index.len()];
    let entries = [
        (VarKey::Alloc { layer: 0, set: set(&[3]) }, 0.1),
        (VarKey::Alloc { layer: 0, set: set(&[1, 2]) }, 0.1),
        (VarKey::Alloc { layer: 1, set: set(&[2]) }, 0.1),
        (VarKey::Alloc { layer: 2, set: set(&[3]) }, 0.5),
        (VarKey::Assign { layer: 0, target: set(&[1, 3]), cached: set(&[3]) }, 0.1),
        (VarKey::Assign { layer: 0, target: set(&[1, 3]), cached: set(&[1, 2]) }, 0.1),
        (VarKey::Assign { layer: 0, target: set(&[2, 3]), cached: set(&[3]) }, 0.1),
        (VarKey::Assign { layer: 1, target: set(&[2, 3]), cached: set(&[2]) }, 0.1),
        (VarKey::Multicast { layer: None, target: set(&[1, 3]) }, 0.1),
        (VarKey::Multicast { layer: None, target: set(&[2, 3]) }, 0.1),
        (VarKey::LayerMem { user: 0, layer: 0 }, 0.1),
        (VarKey::LayerMem { user: 1, layer: 0 }, 0.1),
        (VarKey::LayerMem { user: 1, layer: 1 }, 0.1),
        (VarKey::LayerMem { user: 2, layer: 0 }, 0.1),
        (VarKey::LayerMem { user: 2, layer: 2 }, 0.5),
    ];
    for (key, v) in entries {
        x[model.index.get(&key).unwrap()] = v;
    }
    let sol = LpSolution { status: LpStatus::Optimal, x, objective: 0.2 };
    extract_scheme(&sol, &model).unwrap()
}

#[test]
fn example1_bit_layout() {
    let q = quantize(&hand_built_scheme(), 10).unwrap();
    assert_eq!(q.layer_bits, vec![2, 1, 5]);
    // user 3 holds {3} of layer 1 and {3} of layer 3
    assert_eq!(q.subfile(0, set(&[3])).len(), 1);
    assert_eq!(q.subfile(2, set(&[3])).len(), 5);
    assert_eq!(q.cached_bits(2), 6);
    assert_eq!(q.multicast.values().copied().collect::<Vec<_>>(), vec![1, 1]);
    assert!(q.unicast.values().all(|&b| b == 0));

    let lib = FileLibrary::generate(3, &[0.2, 0.3, 0.8], 10, 1);
    let caches = place(&lib, &q).unwrap();
    let log = deliver(&lib, &q, &[0, 1, 2]).unwrap();
    assert_eq!(log.signals.len(), 2);
    assert!(log.signals.iter().all(|s| s.payload.len() == 1));
    assert!(log.unicasts.is_empty());
    for (k, cache) in caches.iter().enumerate() {
        let d = decode(k, cache, &log, &q, &[0, 1, 2]);
        assert!(check_user(&lib, &q, &log, &d, k, &[0, 1, 2]).decoded);
    }
}

#[test]
fn example1_scales_with_file_size() {
    let scheme = hand_built_scheme();
    for f in [10, 100, 1000, 10_000] {
        let rep = verify(&example1(), &scheme, f, 3).unwrap();
        assert!(rep.passed, "F = {f}: {rep:?}");
        assert!(close(rep.measured_load, 0.2, 1e-12));
    }
}

#[test]
fn solver_scheme_verifies() {
    let inst = example1();
    let scheme = build_o2(&inst).unwrap().solve().unwrap();
    let rep = verify(&inst, &scheme, 10_000, 0).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.max_discrepancy <= rep.tolerance);
}

#[test]
fn zero_memory_sends_everything_uncoded() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 0.0).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let q = quantize(&scheme, 1000).unwrap();
    let lib = FileLibrary::generate(3, &scheme.rates, 1000, 5);
    let log = deliver(&lib, &q, &[0, 1, 2]).unwrap();
    assert!(log.signals.is_empty());
    assert_eq!(log.unicasts.len(), 3);
    assert_eq!(log.total_bits(), 500 + 700 + 1000);
    assert!(verify(&inst, &scheme, 1000, 5).unwrap().passed);
}

#[test]
fn full_memory_sends_nothing() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 2.2).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let q = quantize(&scheme, 1000).unwrap();
    let lib = FileLibrary::generate(3, &scheme.rates, 1000, 5);
    let log = deliver(&lib, &q, &[0, 1, 2]).unwrap();
    assert_eq!(log.total_bits(), 0);
    let rep = verify(&inst, &scheme, 1000, 5).unwrap();
    assert!(rep.passed && rep.measured_load == 0.0);
}

#[test]
fn runs_are_deterministic() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 1.0).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let q = quantize(&scheme, 5000).unwrap();
    let run = |seed| {
        let lib = FileLibrary::generate(3, &scheme.rates, 5000, seed);
        deliver(&lib, &q, &[0, 1, 2]).unwrap()
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
    assert_eq!(verify(&inst, &scheme, 5000, 9).unwrap(), verify(&inst, &scheme, 5000, 9).unwrap());
}

#[test]
fn budget_scheme_matches_reference_load() {
    let inst = ProblemInstance::with_budget(3, reference_rates().rates(), 1.0).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let rep = verify(&inst, &scheme, 10_000, 2).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!((rep.measured_load - 0.6).abs() <= rep.tolerance);
}

#[test]
fn flipped_payload_bit_is_detected() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 1.0).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let q = quantize(&scheme, 2000).unwrap();
    let lib = FileLibrary::generate(3, &scheme.rates, 2000, 4);
    let caches = place(&lib, &q).unwrap();
    let demand = [0, 1, 2];
    let mut log = deliver(&lib, &q, &demand).unwrap();
    let sig = log.signals.iter_mut().find(|s| !s.payload.is_empty()).expect("a multicast");
    let victim = sig.parts[0].recipient;
    let at = sig.parts[0].at;
    let bit = !sig.payload[at];
    sig.payload.set(at, bit);
    let d = decode(victim, &caches[victim], &log, &q, &demand);
    let status = check_user(&lib, &q, &log, &d, victim, &demand);
    assert!(!status.decoded);
    assert_eq!(status.wrong_bits, 1);
}

#[test]
fn missing_side_information_is_reported() {
    let inst = ProblemInstance::with_budget(3, &[0.5, 0.7, 1.0], 1.0).unwrap();
    let scheme = build_o1(&inst).unwrap().solve().unwrap();
    let q = quantize(&scheme, 2000).unwrap();
    let lib = FileLibrary::generate(3, &scheme.rates, 2000, 4);
    let mut caches = place(&lib, &q).unwrap();
    let demand = [0, 1, 2];
    let log = deliver(&lib, &q, &demand).unwrap();
    let user = (0..3)
        .find(|&k| log.signals.iter().any(|s| s.parts.iter().any(|p| p.recipient != k && s.target.contains(k))))
        .expect("a user with side information");
    caches[user].subfiles.clear();
    let d = decode(user, &caches[user], &log, &q, &demand);
    assert!(d.undecodable_signals > 0 || d.missing_bits > 0);
    assert!(!check_user(&lib, &q, &log, &d, user, &demand).decoded);
}

#[test]
fn single_bit_files_still_decode() {
    let inst = example1();
    let scheme = build_o2(&inst).unwrap().solve().unwrap();
    let rep = verify(&inst, &scheme, 1, 0).unwrap();
    assert!(rep.users.iter().all(|u| u.decoded && u.redundant_bits == 0), "{rep:?}");
    assert!(rep.max_discrepancy <= rep.tolerance);
}

#[test]
fn overfull_cache_is_rejected() {
    let mut q = quantize(&hand_built_scheme(), 100).unwrap();
    q.memory_bits[2] = 0;
    let lib = FileLibrary::generate(3, &[0.2, 0.3, 0.8], 100, 0);
    assert!(place(&lib, &q).is_err());
}

#[test]
fn malformed_demand_is_rejected() {
    let q = quantize(&hand_built_scheme(), 100).unwrap();
    let lib = FileLibrary::generate(3, &[0.2, 0.3, 0.8], 100, 0);
    assert!(deliver(&lib, &q, &[0, 0, 1]).is_err());
    assert!(deliver(&lib, &q, &[0, 1]).is_err());
}

#[test]
fn layer_lengths_round_each_layer() {
    assert_eq!(layer_bits(&[0.2, 0.3, 0.8], 10), vec![2, 1, 5]);
    assert_eq!(layer_bits(&[0.5, 0.7, 1.0], 10_000), vec![5000, 2000, 3000]);
}

#[test]
fn random_schemes_decode_without_redundancy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..8 {
        let k = rng.gen_range(2..=4);
        let r = random_rates(&mut rng, k);
        let inst = if rng.gen_bool(0.5) {
            ProblemInstance::with_budget(k, r.rates(), rng.gen_range(0.0..r.total_rate())).unwrap()
        } else {
            let m: Vec<f64> = r.rates().iter().map(|&x| x * rng.gen_range(0.0..1.0)).collect();
            ProblemInstance::with_memories(k, r.rates(), &m).unwrap()
        };
        let scheme = if inst.budget().is_some() { build_o1(&inst) } else { build_o2(&inst) }.unwrap().solve().unwrap();
        let f = 3000;
        let q = quantize(&scheme, f).unwrap();
        let lib = FileLibrary::generate(k, &scheme.rates, f, 1);
        let demand: Vec<usize> = (0..k).collect();
        let log = deliver(&lib, &q, &demand).unwrap();
        for user in 0..k {
            assert_eq!(redundancy_audit(&q, &log, user), 0, "{:?}", r.rates());
        }
        let rep = verify(&inst, &scheme, f, 1).unwrap();
        assert!(rep.passed, "{:?}: {rep:?}", r.rates());
    }
}
