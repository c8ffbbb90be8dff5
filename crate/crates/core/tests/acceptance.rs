//! Acceptance gate: one test per shipping criterion, each printing a single
//! PASS line with the measured margin (visible with `--nocapture`).

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use steer_core::ansatz::{fibonacci_grid, normalize_jevtic, Atom, SphereMeasure};
use steer_core::geometry::{boundary_point, section_support, solve_lambda, GPolicy, PulledBackSection};
use steer_core::qstate::{EprMap, TwoQubitState, TSTATE_TOL};
use steer_core::radius::{
    critical_radius, optimize_ansatz, perturbation_test, principal_radius, tstate_critical_radius,
    Method, OptimizerBudget, Verdict,
};
use steer_core::{CMat4, Mat4, TStateForm, Vec3, Vec4};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn is_physical_diag(t: &Vec3) -> bool {
    let l = [
        0.25 * (1.0 + t.x - t.y + t.z),
        0.25 * (1.0 - t.x + t.y + t.z),
        0.25 * (1.0 + t.x + t.y - t.z),
        0.25 * (1.0 - t.x - t.y - t.z),
    ];
    l.iter().all(|&v| v >= -1e-12)
}

fn form_of(t: Vec3) -> TStateForm {
    let mut phi = Mat4::zeros();
    phi[(0, 0)] = 0.5;
    for k in 0..3 {
        phi[(k + 1, k + 1)] = 0.5 * t[k];
    }
    EprMap::from_phi(phi).canonicalize_tstate(TSTATE_TOL).unwrap()
}

fn werner_state(p: f64) -> TwoQubitState {
    let theta = Mat4::from_diagonal(&Vec4::new(1.0, -p, -p, -p));
    TwoQubitState::from_theta(&theta).unwrap()
}

#[test]
fn criterion_1_werner_threshold() {
    let start = Instant::now();
    let mut max_dev = 0.0f64;
    for p in [0.3, 0.5, 0.8] {
        let r = tstate_critical_radius(&form_of(Vec3::new(-p, -p, -p))).unwrap();
        max_dev = max_dev.max((r.value - 1.0 / (2.0 * p)).abs());
    }
    assert!(max_dev <= 1e-6, "closed form off by {max_dev:.3e}");

    for i in 1..100 {
        let p = i as f64 / 100.0;
        let r = tstate_critical_radius(&form_of(Vec3::new(-p, -p, -p))).unwrap();
        let expected = match i.cmp(&50) {
            std::cmp::Ordering::Less => Verdict::Unsteerable,
            std::cmp::Ordering::Equal => Verdict::Marginal,
            std::cmp::Ordering::Greater => Verdict::Steerable,
        };
        assert_eq!(r.verdict, expected, "verdict at p = {p}");
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 1.0, "criterion 1 took {dt:.2} s");
    println!("[acceptance] criterion 1 (werner threshold): PASS (max dev {max_dev:.2e}, {dt:.2} s)");
}

#[test]
fn criterion_2_engine_vs_closed_form() {
    let start = Instant::now();
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let t = loop {
            let t = Vec3::new(
                r.gen_range(0.2..1.0) * if r.gen::<bool>() { 1.0 } else { -1.0 },
                r.gen_range(0.2..1.0) * if r.gen::<bool>() { 1.0 } else { -1.0 },
                r.gen_range(0.2..1.0) * if r.gen::<bool>() { 1.0 } else { -1.0 },
            );
            if is_physical_diag(&t) {
                break t;
            }
        };
        let form = form_of(t);
        let exact = tstate_critical_radius(&form).unwrap().value;
        // the density must live on the same axes as the canonical map,
        // i.e. use the canonicalized (magnitude-sorted) diagonal
        let density = normalize_jevtic(form.t_diag, 1e-8).unwrap();
        let measure = fibonacci_grid(4096, true, Some(&density)).unwrap();
        let engine = principal_radius(&measure, &form.canonical_map(), 512).unwrap().value;
        let rel = (engine - exact).abs() / exact;
        worst = worst.max(rel);
        assert!(rel <= 0.01, "trial {trial}: t = {t:?}, rel error {rel:.4}");
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 120.0, "criterion 2 took {dt:.1} s");
    println!("[acceptance] criterion 2 (engine vs closed form): PASS (worst rel err {worst:.2e}, {dt:.1} s)");
}

#[test]
fn criterion_3_perturbation_optimality() {
    let start = Instant::now();
    let states = [
        Vec3::new(-0.4, -0.4, -0.4),
        Vec3::new(-0.9, -0.8, -0.7),
        Vec3::new(0.5, -0.6, 0.4),
        Vec3::new(-0.55, 0.35, 0.45),
        Vec3::new(-0.6, -0.5, -0.3),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (i, &t) in states.iter().enumerate() {
        assert!(is_physical_diag(&t), "test state {t:?} must be physical");
        let rep = perturbation_test(&form_of(t), 100, 300 + i as u64).unwrap();
        worst = worst.max(rep.max_excess / rep.tolerance);
        assert_eq!(
            rep.violations, 0,
            "t = {t:?}: {} of {} perturbations raised the radius beyond {:.3e}",
            rep.violations, rep.trials, rep.tolerance
        );
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 300.0, "criterion 3 took {dt:.1} s");
    println!("[acceptance] criterion 3 (perturbation optimality): PASS (worst excess {worst:.2} of tolerance, {dt:.1} s)");
}

#[test]
fn criterion_4_half_mass_cut_is_equator_cut() {
    let start = Instant::now();
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let pairs = r.gen_range(8..200);
        let mut atoms = Vec::with_capacity(2 * pairs);
        for _ in 0..pairs {
            atoms.push(Atom { weight: r.gen_range(0.1..1.0), n: random_unit(&mut r) });
        }
        let anti: Vec<Atom> = atoms.iter().map(|a| Atom { weight: a.weight, n: -a.n }).collect();
        atoms.extend(anti);
        let m = SphereMeasure::from_atoms(atoms, true, Vec3::zeros());
        let n0 = random_unit(&mut r);
        let (lambda, gamma) = solve_lambda(&m, &n0, 0.5);
        let half_mass = boundary_point(&m, &n0, lambda, GPolicy::Fraction(gamma));
        let equator = boundary_point(&m, &n0, 0.0, GPolicy::AllOne);
        let dev = (half_mass - equator).norm();
        worst = worst.max(dev);
        assert!(dev <= 1e-9, "cut mismatch {dev:.3e}");
    }
    let dt = start.elapsed().as_secs_f64();
    println!("[acceptance] criterion 4 (half-mass cut = equator cut): PASS (worst dev {worst:.2e}, {dt:.2} s)");
}

/// Exact LP oracle: every basic solution has at most one fractional entry,
/// so enumerating all 0/1 patterns with one free coordinate is exhaustive.
fn vertex_oracle(c: &[f64], t: &[f64], level: f64) -> f64 {
    let m = c.len();
    let mut best = f64::NEG_INFINITY;
    for pattern in 0..(1u32 << m) {
        let tb: f64 = (0..m).filter(|&i| pattern >> i & 1 == 1).map(|i| t[i]).sum();
        if (tb - level).abs() <= 1e-9 {
            let v: f64 = (0..m).filter(|&i| pattern >> i & 1 == 1).map(|i| c[i]).sum();
            best = best.max(v);
        }
    }
    for f in 0..m {
        for pattern in 0..(1u32 << (m - 1)) {
            let mut tb = 0.0;
            let mut v = 0.0;
            let mut bit = 0;
            for i in 0..m {
                if i == f {
                    continue;
                }
                if pattern >> bit & 1 == 1 {
                    tb += t[i];
                    v += c[i];
                }
                bit += 1;
            }
            let beta_f = (level - tb) / t[f];
            if (-1e-12..=1.0 + 1e-12).contains(&beta_f) {
                best = best.max(v + beta_f.clamp(0.0, 1.0) * c[f]);
            }
        }
    }
    best
}

/// Grid oracle: max of `c.b` over the step-0.05 grid with the equality
/// relaxed to a band of width `delta`, via meet-in-the-middle and a sparse
/// table for range-maximum queries over the sorted right half.
fn grid_oracle(c: &[f64], t: &[f64], level: f64, step: f64, delta: f64) -> f64 {
    let m = c.len();
    let half = m / 2;
    let levels = (1.0 / step).round() as usize + 1; // 21 grid values per atom
    let enumerate = |lo: usize, hi: usize| -> Vec<(f64, f64)> {
        let k = hi - lo;
        let mut out = Vec::with_capacity(levels.pow(k as u32));
        let mut idx = vec![0usize; k];
        loop {
            let mut ts = 0.0;
            let mut vs = 0.0;
            for (j, &g) in idx.iter().enumerate() {
                let b = g as f64 * step;
                ts += b * t[lo + j];
                vs += b * c[lo + j];
            }
            out.push((ts, vs));
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < levels {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == k {
                    return out;
                }
            }
        }
    };
    let left = enumerate(0, half);
    let mut right = enumerate(half, m);
    right.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let tsums: Vec<f64> = right.iter().map(|e| e.0).collect();
    // sparse table over right-half values
    let n = right.len();
    let log = usize::BITS as usize - n.leading_zeros() as usize;
    let mut table = vec![right.iter().map(|e| e.1).collect::<Vec<f64>>()];
    for j in 1..log {
        let span = 1 << j;
        let prev = &table[j - 1];
        let row: Vec<f64> = (0..=n - span)
            .map(|i| prev[i].max(prev[i + span / 2]))
            .collect();
        table.push(row);
    }
    let range_max = |a: usize, b: usize| -> f64 {
        // max over [a, b), b > a
        let j = (usize::BITS as usize - 1) - (b - a).leading_zeros() as usize;
        table[j][a].max(table[j][b - (1 << j)])
    };
    let mut best = f64::NEG_INFINITY;
    for &(tl, vl) in &left {
        let lo = tsums.partition_point(|&v| v < level - tl - delta);
        let hi = tsums.partition_point(|&v| v <= level - tl + delta);
        if lo < hi {
            best = best.max(vl + range_max(lo, hi));
        }
    }
    best
}

#[test]
fn criterion_5_support_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(505);
    const M: usize = 8;
    const STEP: f64 = 0.05;
    let mut worst_vertex = 0.0f64;
    for trial in 0..100 {
        let t: Vec<f64> = (0..M)
            .map(|_| r.gen_range(0.3..1.2) * if r.gen_bool(0.75) { 1.0 } else { -1.0 })
            .collect();
        let c: Vec<f64> = (0..M).map(|_| r.gen_range(-1.0..1.0)).collect();
        let h_min: f64 = t.iter().map(|&v| v.min(0.0)).sum();
        let h_max: f64 = t.iter().map(|&v| v.max(0.0)).sum();
        let level = h_min + r.gen_range(0.1..0.9) * (h_max - h_min);

        let section = PulledBackSection {
            gen_t: t.clone(),
            gen_v: c.iter().map(|&v| Vec3::new(v, 0.0, 0.0)).collect(),
            level,
        };
        let h = section_support(&section, &Vec3::x()).unwrap();

        let exact = vertex_oracle(&c, &t, level);
        worst_vertex = worst_vertex.max((h - exact).abs());
        assert!(
            (h - exact).abs() <= 1e-9,
            "trial {trial}: solver {h} vs vertex oracle {exact}"
        );

        // resolution bound of the beta grid: rounding the LP optimum moves
        // the constraint by at most delta and the value by at most c_res;
        // conversely the relaxed-band optimum exceeds the LP value by at
        // most delta times the steepest marginal ratio.
        let delta: f64 = t.iter().map(|v| v.abs()).sum::<f64>() * STEP / 2.0;
        let c_res: f64 = c.iter().map(|v| v.abs()).sum::<f64>() * STEP / 2.0;
        let ratio_max = c
            .iter()
            .zip(&t)
            .map(|(c, t)| (c / t).abs())
            .fold(0.0f64, f64::max);
        let grid = grid_oracle(&c, &t, level, STEP, delta);
        assert!(
            h <= grid + c_res + 1e-9,
            "trial {trial}: solver {h} above grid oracle bound {}",
            grid + c_res
        );
        assert!(
            grid <= h + delta * ratio_max + 1e-9,
            "trial {trial}: grid oracle {grid} above solver bound {}",
            h + delta * ratio_max
        );
    }
    let dt = start.elapsed().as_secs_f64();
    println!("[acceptance] criterion 5 (support oracle equivalence): PASS (worst vertex dev {worst_vertex:.2e}, {dt:.1} s)");
}

#[test]
fn criterion_6_lhs_simulation() {
    let start = Instant::now();
    let p = 0.45;
    let state = werner_state(p);
    let map = state.epr_map();
    let density = normalize_jevtic(Vec3::new(-p, -p, -p), 1e-8).unwrap();
    let measure = fibonacci_grid(1024, true, Some(&density)).unwrap();
    let mut r = rng(606);
    let dirs: Vec<Vec3> = (0..20).map(|_| random_unit(&mut r)).collect();
    let rep = steer_core::simulate(&measure, &map, &dirs, 1_000_000, 6).unwrap();
    assert_eq!(rep.directions.len(), 20);
    assert!(rep.max_abs_z <= 5.0, "max |z| = {}", rep.max_abs_z);
    assert!(rep.max_residual <= 1e-9, "max residual = {:.3e}", rep.max_residual);
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 60.0, "criterion 6 took {dt:.1} s");
    println!("[acceptance] criterion 6 (lhs simulation): PASS (max |z| {:.2}, max residual {:.1e}, {dt:.1} s)", rep.max_abs_z, rep.max_residual);
}

#[test]
fn criterion_7_degenerate_and_steerable_routing() {
    let start = Instant::now();
    let mixed = TwoQubitState::from_matrix(CMat4::identity() * nalgebra::Complex::new(0.25, 0.0)).unwrap();
    let r = critical_radius(&mixed, &OptimizerBudget::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Unsteerable);
    assert_eq!(r.method, Method::DegenerateSeparable);

    let singlet = werner_state(1.0);
    let r = critical_radius(&singlet, &OptimizerBudget::default()).unwrap();
    assert_relative_eq!(r.value, 0.5, epsilon = 1e-6);
    assert_eq!(r.verdict, Verdict::Steerable);
    let dt = start.elapsed().as_secs_f64();
    println!("[acceptance] criterion 7 (degenerate/steerable routing): PASS (singlet R = {:.8}, {dt:.2} s)", r.value);
}

#[test]
fn criterion_8_optimizer_recovery() {
    let start = Instant::now();
    let states = [
        Vec3::new(-0.4, -0.4, -0.4),
        Vec3::new(-0.9, -0.8, -0.7),
        Vec3::new(0.5, -0.6, 0.4),
    ];
    let mut worst_frac = f64::INFINITY;
    for &t in &states {
        let form = form_of(t);
        let exact = tstate_critical_radius(&form).unwrap().value;
        let (_, found) = optimize_ansatz(&form.canonical_map(), 1024, 200, 0).unwrap();
        let frac = found.value / exact;
        worst_frac = worst_frac.min(frac);
        assert!(
            frac >= 0.98,
            "t = {t:?}: optimizer reached only {:.4} of the closed form",
            frac
        );
    }
    // determinism: identical seed, identical result
    let map = form_of(states[0]).canonical_map();
    let (_, a) = optimize_ansatz(&map, 1024, 200, 7).unwrap();
    let (_, b) = optimize_ansatz(&map, 1024, 200, 7).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits(), "same seed must reproduce bitwise");
    let dt = start.elapsed().as_secs_f64();
    println!("[acceptance] criterion 8 (optimizer recovery): PASS (worst fraction {worst_frac:.4}, {dt:.1} s)");
}
