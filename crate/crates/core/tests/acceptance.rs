//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs with a custom harness so the verdict lines are always printed.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;

use lrring::analysis::{
    count_distinct_levels, distance_selectivity_check, entangled_projector_census,
    find_last_crossing, ground_exclusivity_violations, ground_nn_variation, locate_crossings,
    nn_linear_fit, projector_dimension_histogram, separation_coverage, AlphaGrid, Analyzer,
    EventKind, Spacing, SweepResult,
};
use lrring::cli::{parse_config, render};
use lrring::entanglement::{
    concurrence_structured, concurrence_xstate_oracle, extract_abc, level_meyer_wallach,
    level_pair_reduction, level_site_reduction, DEFAULT_CONCURRENCE_THRESHOLD as THR,
};
use lrring::model::build_hamiltonian;
use lrring::spectral::{diagonalize, lagrange_projector, SpectralDecomposition};
use lrring::{Alpha, RingSpec, Variant};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn fin(a: f64) -> Alpha {
    Alpha::Finite(a)
}

fn dec(n: usize, alpha: Alpha, variant: Variant) -> SpectralDecomposition {
    diagonalize(&RingSpec::new(n, alpha, variant).unwrap()).unwrap()
}

fn ensure(ok: bool, pass: String, fail: String) -> Check {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn c1_level_counts() -> Check {
    let cases = [
        (fin(0.0), 5),
        (fin(2.0), 19),
        (fin(1.0), 45),
        (fin(3.0), 45),
        (Alpha::Infinity, 40),
    ];
    let got: Vec<(Alpha, usize, usize)> = cases
        .iter()
        .map(|&(a, want)| (a, count_distinct_levels(8, a, 1e-9).unwrap(), want))
        .collect();
    let summary = got
        .iter()
        .map(|(a, g, _)| format!("α={a}:{g}"))
        .collect::<Vec<_>>()
        .join(" ");
    ensure(got.iter().all(|(_, g, w)| g == w), summary.clone(), summary)
}

fn c2_top_eigenspace() -> Check {
    let alphas = [fin(0.0), fin(0.7), fin(2.0), fin(5.0), Alpha::Infinity];
    let mut worst_e = 0.0f64;
    let mut worst_p = 0.0f64;
    for n in 2..=10 {
        let mut reference: Option<DMatrix<f64>> = None;
        for &a in &alphas {
            let d = dec(n, a, Variant::Shifted);
            let top = d.levels().len() - 1;
            let l = d.level(top);
            if l.multiplicity != n + 1 {
                return Err(format!("N={n} α={a}: top multiplicity {}", l.multiplicity));
            }
            worst_e = worst_e.max(l.energy.abs());
            let p = d.projector(top);
            match &reference {
                Some(r) => worst_p = worst_p.max((&p - r).amax()),
                None => reference = Some(p),
            }
        }
    }
    let msg = format!("N=2..10: max |E_top| = {worst_e:.1e}, max projector drift = {worst_p:.1e}");
    ensure(worst_e < 1e-10 && worst_p < 1e-9, msg.clone(), msg)
}

fn c3_single_site() -> Check {
    let mut dev = 0.0f64;
    let mut mw = 0.0f64;
    for n in 2..=8 {
        for a in [fin(0.5), fin(1.0), fin(2.0), fin(3.3), Alpha::Infinity] {
            let d = dec(n, a, Variant::Standard);
            for l in 0..d.levels().len() {
                for j in 1..=n {
                    let r = level_site_reduction(&d, l, j).unwrap();
                    dev = dev.max((r - nalgebra::Matrix2::identity() * 0.5).amax());
                }
                mw = mw.max((level_meyer_wallach(&d, l).unwrap() - 1.0).abs());
            }
        }
    }
    let msg = format!("max |ρ_j − I/2| = {dev:.1e}, max |MW − 1| = {mw:.1e}");
    ensure(dev < 1e-12 && mw < 1e-10, msg.clone(), msg)
}

fn c4_pair_structure() -> Check {
    let (mut res, mut trace, mut cb, mut oracle) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut count = 0usize;
    for n in 2..=10 {
        for a in [
            fin(0.0),
            fin(0.5),
            fin(1.0),
            fin(2.0),
            fin(3.7),
            fin(10.0),
            Alpha::Infinity,
        ] {
            let d = dec(n, a, Variant::Standard);
            for l in 0..d.levels().len() {
                for j in 1..=n {
                    for k in j + 1..=n {
                        let r = level_pair_reduction(&d, l, j, k).unwrap();
                        let st = match extract_abc(&r, 1e-10) {
                            Ok(st) => st,
                            Err(e) => return Err(format!("N={n} α={a} level {l} ({j},{k}): {e}")),
                        };
                        res = res.max(st.structure_residual);
                        trace = trace.max((st.a + st.b - 0.5).abs());
                        cb = cb.max(st.c.abs() - st.b);
                        let o = concurrence_xstate_oracle(&r, 1e-10).unwrap();
                        oracle = oracle.max((o - concurrence_structured(&st)).abs());
                        count += 1;
                    }
                }
            }
        }
    }
    let msg = format!(
        "{count} reductions (N=2..10): residual {res:.1e}, |a+b−½| {trace:.1e}, max(|c|−b) {cb:.1e}, oracle gap {oracle:.1e}"
    );
    ensure(
        res < 1e-10 && trace < 1e-10 && cb <= 1e-10 && oracle < 1e-10,
        msg.clone(),
        msg,
    )
}

fn c5_null_properties() -> Check {
    let an = Analyzer::standard(8).unwrap();
    let hs = an.point(fin(2.0)).unwrap();
    let hs_max = (0..hs.n_levels())
        .flat_map(|l| (2..=4).map(move |d| (l, d)))
        .map(|(l, d)| hs.concurrence(l, d))
        .fold(0.0, f64::max);
    let zero = an.point(fin(0.0)).unwrap();
    let zero_max = zero
        .records
        .iter()
        .map(|r| r.concurrence)
        .fold(0.0, f64::max);
    let msg = format!(
        "α=2: {} levels, max C(d≥2) = {hs_max:.1e}; α=0: {} levels, max C = {zero_max:.1e}",
        hs.n_levels(),
        zero.n_levels()
    );
    ensure(
        hs.n_levels() == 19 && hs_max < THR && zero_max < THR,
        msg.clone(),
        msg,
    )
}

fn c6_ground_state() -> Check {
    let an = Analyzer::standard(8).unwrap();
    let sw = an
        .sweep(&AlphaGrid::range(0.05, 12.0, 50, Spacing::Log, vec![]).unwrap())
        .unwrap();
    let excl = ground_exclusivity_violations(&sw, THR);
    let v = ground_nn_variation(&sw).unwrap();
    let msg = format!(
        "exclusivity violations {}, C(α=12) = {:.4}, variation {:.2}% (min {:.4}, max {:.4})",
        excl.len(),
        v.at_largest_alpha,
        100.0 * v.relative,
        v.min,
        v.max
    );
    ensure(
        excl.is_empty() && (0.40..=0.42).contains(&v.at_largest_alpha) && v.relative <= 0.04,
        msg.clone(),
        msg,
    )
}

/// The default N = 8 sweep with curve roles used by criteria 7, 8 and 10.
struct Landscape {
    an: Analyzer,
    sw: SweepResult,
}

impl Landscape {
    fn new() -> Self {
        let an = Analyzer::standard(8).unwrap();
        let sw = an.sweep(&AlphaGrid::default_sweep()).unwrap();
        Self { an, sw }
    }

    /// Curves whose entanglement (over the whole grid) is exactly `seps`
    /// with the given multiplicity.
    fn curves_with(&self, seps: &[usize], multiplicity: usize) -> Vec<usize> {
        entangled_projector_census(&self.sw, THR)
            .curves
            .into_iter()
            .filter(|c| c.separations == seps && c.multiplicity == multiplicity)
            .map(|c| c.curve)
            .collect()
    }
}

fn c7_crossings(ls: &Landscape) -> Check {
    let last = find_last_crossing(&ls.an, 12.0).unwrap().map(|e| e.alpha);
    // maximal-distance curves: a = 1-dim {3,4}, b = 6-dim {4}; sep-3 curve c = 3-dim {3}
    let a = ls.curves_with(&[3, 4], 1);
    let b = ls.curves_with(&[4], 6);
    let c = ls.curves_with(&[3], 3);
    if a.len() != 1 || b.len() != 1 || c.len() != 1 {
        return Err(format!("curve roles not unique: a {a:?}, b {b:?}, c {c:?}"));
    }
    let ab: Vec<f64> = locate_crossings(&ls.an, &ls.sw, a[0], b[0])
        .unwrap()
        .iter()
        .map(|e| e.alpha)
        .collect();
    let ac: Vec<f64> = locate_crossings(&ls.an, &ls.sw, a[0], c[0])
        .unwrap()
        .iter()
        .map(|e| e.alpha)
        .collect();
    let ok_last = last.is_some_and(|x| near(x, 7.29, 0.05));
    let ok_ab = ab.iter().any(|&x| near(x, 4.63, 0.05));
    let ok_ac = ac.iter().any(|&x| near(x, 2.35, 0.05));
    let msg = format!(
        "last {} [{}], a–b {ab:.4?} vs 4.63 [{}], a–c {ac:.4?} vs 2.35 [{}]",
        last.map_or("none".into(), |x| format!("{x:.4}")),
        if ok_last { "ok" } else { "off" },
        if ok_ab { "ok" } else { "off" },
        if ok_ac { "ok" } else { "off" },
    );
    ensure(ok_last && ok_ab && ok_ac, msg.clone(), msg)
}

fn c8_boundaries(ls: &Landscape) -> Check {
    let grid = ls.sw.curve_alphas();
    let range = [grid[0], grid[grid.len() - 1]];
    let cov2 = separation_coverage(&ls.an, &ls.sw, 2).unwrap();
    let gaps = cov2.interior_gaps(range);
    let cov4 = separation_coverage(&ls.an, &ls.sw, 4).unwrap();
    let nn_max = ls.curves_with(&[1, 4], 1);
    let onsets: Vec<f64> = cov4
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Onset && nn_max.contains(&e.curves[0]))
        .map(|e| e.alpha)
        .collect();
    let ok_gap = gaps.len() == 1 && near(gaps[0][0], 2.54, 0.05) && near(gaps[0][1], 3.71, 0.05);
    let ok_onset = onsets.len() == 1 && near(onsets[0], 3.88, 0.05);
    let msg =
        format!("separation-2 gaps {gaps:.4?}, {{1,4}}-curve separation-4 onset {onsets:.4?}");
    ensure(ok_gap && ok_onset, msg.clone(), msg)
}

fn c9_histogram() -> Check {
    let h = projector_dimension_histogram(&Analyzer::standard(8).unwrap(), fin(1.0)).unwrap();
    let want = BTreeMap::from([
        (1, 6),
        (2, 4),
        (3, 6),
        (5, 6),
        (6, 11),
        (7, 1),
        (9, 1),
        (10, 7),
        (14, 3),
    ]);
    ensure(h == want, format!("{h:?}"), format!("{h:?} ≠ {want:?}"))
}

fn c10_census(ls: &Landscape) -> Check {
    let c = entangled_projector_census(&ls.sw, THR);
    let multi: Vec<_> = c.multi_distance_branches().collect();
    let all_alpha = multi
        .iter()
        .filter(|b| {
            b.distance_set() == [3, 4]
                && b.spans_curve
                && b.separations.iter().all(|s| s.whole_branch)
        })
        .count();
    let threshold: Vec<f64> = multi
        .iter()
        .filter(|b| b.distance_set() == [1, 4])
        .filter_map(|b| {
            b.separations
                .iter()
                .find(|s| s.separation == 4 && !s.whole_branch)
                .map(|s| s.first_alpha)
        })
        .collect();
    let ok = c.entangled_branches == 12
        && c.single_distance_branches == 10
        && multi.len() == 2
        && all_alpha == 1
        && threshold.len() == 1
        && near(threshold[0], 3.88, 0.05)
        && c.one_dimensional_branches == c.one_dimensional_curves
        && c.one_dimensional_curves == 6;
    let msg = format!(
        "entangled branches {} (single-distance {}), {{3,4}} for all α: {all_alpha}, {{1,4}} from {threshold:.3?}, \
         one-dimensional branches {}/{} | per whole curve: {} curves, {} single-distance, {}/{} one-dimensional",
        c.entangled_branches,
        c.single_distance_branches,
        c.one_dimensional_branches,
        c.one_dimensional_curves,
        c.entangled_curves,
        c.single_distance_curves,
        c.one_dimensional_entangled_curves,
        c.one_dimensional_curves
    );
    ensure(ok, msg.clone(), msg)
}

fn c11_linear_law() -> Check {
    let an = Analyzer::standard(8).unwrap();
    let inf = nn_linear_fit(&an, Alpha::Infinity).unwrap();
    let six = nn_linear_fit(&an, fin(6.0)).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let ok = inf.relative_residual() < 0.01
        && six.relative_residual() < 0.05
        && rel(six.a, inf.a) < 0.05
        && rel(six.b, inf.b) < 0.05;
    let msg = format!(
        "α=∞: A={:.6} B={:.6} residual {:.1e} of max; α=6: A={:.6} B={:.6} residual {:.2}% of max",
        inf.a,
        inf.b,
        inf.relative_residual(),
        six.a,
        six.b,
        100.0 * six.relative_residual()
    );
    ensure(ok, msg.clone(), msg)
}

fn c12_selectivity() -> Check {
    let an = Analyzer::standard(8).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for a in [0.5, 1.0, 3.0, 5.0, 9.0] {
        let v = distance_selectivity_check(&an, fin(a)).unwrap();
        ok &= v.is_empty();
        let desc: Vec<String> = v
            .iter()
            .map(|x| format!("level {} {:?}", x.level, x.separations))
            .collect();
        parts.push(format!("α={a}: [{}]", desc.join(", ")));
    }
    let msg = parts.join("; ");
    ensure(ok, msg.clone(), msg)
}

fn c13_small_rings() -> Check {
    let mut worst = 0.0f64;
    let mut singlet = Vec::new();
    for a in [fin(0.0), fin(0.8), fin(2.0), fin(6.0), Alpha::Infinity] {
        for (n, want) in [
            (2usize, [(-3.0, 1usize), (1.0, 3)]),
            (3, [(-3.0, 4), (3.0, 4)]),
        ] {
            let spec = RingSpec::new(n, a, Variant::Standard).unwrap();
            let d = diagonalize(&spec).unwrap();
            let got: Vec<(f64, usize)> = d
                .levels()
                .iter()
                .map(|l| (l.energy, l.multiplicity))
                .collect();
            if got.len() != 2 || got.iter().zip(&want).any(|(g, w)| g.1 != w.1) {
                return Err(format!("N={n} α={a}: levels {got:?}"));
            }
            for (g, w) in got.iter().zip(&want) {
                worst = worst.max((g.0 - w.0).abs());
            }
            // analytic projectors: singlet (1 − H)/4 for N = 2, spin-3/2 (H + 3)/6 for N = 3
            let h = build_hamiltonian(&spec).into_matrix();
            let dim = h.nrows();
            let eye = DMatrix::<f64>::identity(dim, dim);
            let (level, exact) = if n == 2 {
                (0, (&eye - &h) / 4.0)
            } else {
                (1, (&h + &eye * 3.0) / 6.0)
            };
            worst = worst.max((d.projector(level) - exact).amax());
            if n == 2 {
                let st = extract_abc(&level_pair_reduction(&d, 0, 1, 2).unwrap(), 1e-12).unwrap();
                singlet.push(concurrence_structured(&st));
            }
        }
    }
    let msg = format!("max deviation from analytic levels/projectors {worst:.1e}, singlet concurrences {singlet:?}");
    ensure(
        worst < 1e-12 && singlet.iter().all(|&c| c == 1.0),
        msg.clone(),
        msg,
    )
}

fn c14_projector_algebra() -> Check {
    let mut alg = 0.0f64;
    for a in [fin(1.3), fin(2.0), Alpha::Infinity] {
        let d = dec(8, a, Variant::Standard);
        let ps: Vec<DMatrix<f64>> = (0..d.levels().len()).map(|i| d.projector(i)).collect();
        let mut sum = DMatrix::<f64>::zeros(256, 256);
        for (i, p) in ps.iter().enumerate() {
            alg = alg.max((p * p - p).amax());
            for q in &ps[i + 1..] {
                alg = alg.max((p * q).amax());
            }
            sum += p;
        }
        alg = alg.max((sum - DMatrix::<f64>::identity(256, 256)).amax());
    }
    let spec = RingSpec::new(8, fin(2.0), Variant::Standard).unwrap();
    let d = diagonalize(&spec).unwrap();
    let h = build_hamiltonian(&spec);
    let energies: Vec<f64> = d.levels().iter().map(|l| l.energy).collect();
    let mut lag = 0.0f64;
    for (i, &e) in energies.iter().enumerate() {
        let p = lagrange_projector(&h, &energies, e).unwrap();
        lag = lag.max((p - d.projector(i)).amax());
    }
    let msg = format!(
        "N=8: idempotence/orthogonality/completeness {alg:.1e}; Lagrange vs eigenvector (α=2, {} levels) {lag:.1e}",
        energies.len()
    );
    ensure(
        alg < 1e-10 && lag < 1e-6 && energies.len() == 19,
        msg.clone(),
        msg,
    )
}

fn c15_determinism() -> Check {
    let cfg = parse_config(["lrring", "report", "--n", "8"], None).map_err(|e| e.to_string())?;
    let first = render(&cfg).map_err(|e| e.to_string())?;
    let second = render(&cfg).map_err(|e| e.to_string())?;
    let msg = format!("two N=8 default-grid reports, {} bytes each", first.len());
    ensure(
        first == second,
        msg.clone(),
        format!("{msg}: outputs differ"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let landscape = Landscape::new();
    let criteria: Vec<Criterion> = vec![
        ("spectrum-size counts", Box::new(c1_level_counts)),
        ("top eigenspace", Box::new(c2_top_eigenspace)),
        ("single-site reductions", Box::new(c3_single_site)),
        ("reduced-matrix structure", Box::new(c4_pair_structure)),
        (
            "Haldane-Shastry and α=0 null properties",
            Box::new(c5_null_properties),
        ),
        ("ground-state behaviour", Box::new(c6_ground_state)),
        ("crossing locations", Box::new(|| c7_crossings(&landscape))),
        (
            "entanglement boundaries",
            Box::new(|| c8_boundaries(&landscape)),
        ),
        ("projector-dimension histogram", Box::new(c9_histogram)),
        (
            "entangled-projector census",
            Box::new(|| c10_census(&landscape)),
        ),
        ("nearest-neighbour linear law", Box::new(c11_linear_law)),
        ("distance selectivity", Box::new(c12_selectivity)),
        ("small-ring oracles", Box::new(c13_small_rings)),
        ("projector algebra", Box::new(c14_projector_algebra)),
        ("determinism", Box::new(c15_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {tag} {name} ({:.1}s): {detail}",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.0}s)",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
