//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;
use skewlab::bundles::lyapunov_ensemble;
use skewlab::ergodic::slab_bound;
use skewlab::foliation::{build_su_path, leaf_density_radius};
use skewlab::point::{circle_difference, circle_distance};
use skewlab::stats::{batch_means, stream_rng, BATCHES};
use skewlab::{
    birkhoff_dispersion, box_transitivity, integrability_defect, lyapunov_spectrum,
    mean_center_exponent, pesin_entropy_estimate, quadrilateral_holonomy, sample_preorbit,
    srb_delta_u, srb_density, unstable_direction_spread, BaseMap, CircleExtension,
    ExpandingCircleMap, FiberedPoint, LeafError, LegPolicy, LinearToralEndomorphism, Observable,
    PreorbitPolicy, QuadrilateralSpec, RotationExtension, StableLeafChart, ToralExtension,
    TorusPoint2, UnstableLeafChart,
};

const EPS: f64 = 2.0;
const SEED: u64 = 0x5eed;

fn example() -> ToralExtension {
    ToralExtension::standard_example()
}

fn product() -> ToralExtension {
    RotationExtension::product(LinearToralEndomorphism::standard_example())
}

fn doubling() -> CircleExtension {
    CircleExtension::with_default_bump(ExpandingCircleMap::doubling()).unwrap()
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn structure() -> Check {
    let f = example();
    let mut worst_image: f64 = 0.0;
    let mut worst_jacobian: f64 = 0.0;
    for i in 0..10_000 {
        let p = FiberedPoint::uniform(&mut stream_rng(SEED, i));
        let pre = f.preimages(&p);
        if pre.len() != 2 {
            return Err(format!("point {i} has {} preimages", pre.len()));
        }
        for q in &pre {
            worst_image = worst_image.max(f.apply(q).distance(&p));
        }
        worst_jacobian = worst_jacobian.max((f.jacobian_sum_check(&p) - 1.0).abs());
    }
    ensure(
        worst_image < 1e-12 && worst_jacobian < 1e-12,
        format!(
            "max |F(q) - p| = {worst_image:.2e}, max |jacobian sum - 1| = {worst_jacobian:.2e}"
        ),
    )
}

fn finite_difference(f: &ToralExtension, p: &FiberedPoint<TorusPoint2>, h: f64) -> [[f64; 3]; 3] {
    let shift = |dx: f64, dy: f64, dt: f64| {
        FiberedPoint::new(
            TorusPoint2::new(p.base.x() + dx, p.base.y() + dy),
            p.theta() + dt,
        )
    };
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut d = [0.0; 3];
        d[j] = h;
        let a = f.apply(&shift(d[0], d[1], d[2]));
        let b = f.apply(&shift(-d[0], -d[1], -d[2]));
        m[0][j] = circle_difference(a.base.x(), b.base.x()) / (2.0 * h);
        m[1][j] = circle_difference(a.base.y(), b.base.y()) / (2.0 * h);
        m[2][j] = circle_difference(a.theta(), b.theta()) / (2.0 * h);
    }
    m
}

fn derivative() -> Check {
    let f = example();
    let mut worst: f64 = 0.0;
    let mut rng = stream_rng(SEED, 1);
    let center = f.bump().unwrap().center();
    let mut points = vec![FiberedPoint::new(center, 0.4)];
    for _ in 0..999 {
        // half of the points inside the bump support
        let p: FiberedPoint<TorusPoint2> = if rng.gen_bool(0.5) {
            FiberedPoint::new(
                TorusPoint2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)),
                rng.gen(),
            )
        } else {
            FiberedPoint::uniform(&mut rng)
        };
        points.push(p);
    }
    for p in &points {
        let d = f.derivative(&p.base);
        let fd = finite_difference(&f, p, 1e-6);
        for (i, row) in fd.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                worst = worst.max((d.matrix()[(i, j)] - v).abs());
            }
        }
    }
    // the displayed matrix in eigen coordinates at the bump center: diag(a_s, a_u, 1)
    // with bottom row (0, eps, 1)
    let e = *f.base_map().eigen();
    let d = f.derivative(&center);
    let m = d.matrix();
    let mut displayed: f64 = 0.0;
    for (k, (v, a)) in [(e.v_s, e.a_s), (e.v_u, e.a_u)].into_iter().enumerate() {
        let image = [
            m[(0, 0)] * v[0] + m[(0, 1)] * v[1],
            m[(1, 0)] * v[0] + m[(1, 1)] * v[1],
        ];
        displayed = displayed
            .max((image[0] - a * v[0]).abs())
            .max((image[1] - a * v[1]).abs());
        let row = m[(2, 0)] * v[0] + m[(2, 1)] * v[1];
        displayed = displayed.max((row - if k == 0 { 0.0 } else { EPS }).abs());
    }
    displayed = displayed
        .max((m[(2, 2)] - 1.0).abs())
        .max(m[(0, 2)].abs())
        .max(m[(1, 2)].abs());
    ensure(
        worst < 1e-6 && displayed < 1e-12,
        format!(
            "max |dF - FD| = {worst:.2e} over 1000 points, displayed-row error {displayed:.2e}"
        ),
    )
}

fn exponents() -> Check {
    let f = example();
    let targets = [(2.0 - 2f64.sqrt()).ln(), 0.0, (2.0 + 2f64.sqrt()).ln()];
    let x = FiberedPoint::new(TorusPoint2::new(0.123, 0.456), 0.789);
    let s = lyapunov_spectrum(&f, &x, 1_000_000, SEED);
    let err = |i: usize| (s.exponents[i] - targets[i]).abs();
    let sum: f64 = s.exponents.iter().sum();
    ensure(
        err(0) < 1e-3
            && err(2) < 1e-3
            && s.exponents[1].abs() < 1e-8
            && (sum - 2f64.ln()).abs() < 1e-6,
        format!(
            "lambda = [{:.7}, {:.1e}, {:.7}], sum - ln 2 = {:.1e}",
            s.exponents[0],
            s.exponents[1],
            s.exponents[2],
            sum - 2f64.ln()
        ),
    )
}

fn spread() -> Check {
    let depth = 60;
    let o = FiberedPoint::origin();
    let spread_of = |f: &ToralExtension| -> Result<f64, String> {
        let constant = sample_preorbit(
            f,
            &o,
            depth,
            &PreorbitPolicy::FixedItinerary(vec![0; depth]),
        )
        .map_err(|e| e.to_string())?;
        let outside = LegPolicy::default_for(f)
            .preorbit(f, &o, depth)
            .map_err(|e| e.to_string())?;
        unstable_direction_spread(f, &[constant, outside], depth).map_err(|e| e.to_string())
    };
    let analytic = ((EPS / (1.0 + 2f64.sqrt())).atan() - (EPS / (2.0 + 2f64.sqrt())).atan()).abs();
    let a = spread_of(&example())?;
    let b = spread_of(&product())?;
    ensure(
        (a - analytic).abs() < 1e-6 && b < 1e-10,
        format!("spread {a:.10} vs analytic {analytic:.10}, product spread {b:.1e}"),
    )
}

fn non_integrability() -> Check {
    let o = FiberedPoint::origin();
    let scales: Vec<f64> = (1..=10).map(|i| 0.04 * i as f64).collect();
    let pairs: Vec<(f64, f64)> = scales
        .iter()
        .flat_map(|t| scales.iter().map(move |s| (*t, *s)))
        .collect();
    let g = product();
    let mut product_max: f64 = 0.0;
    for (t, s) in &pairs {
        let h = quadrilateral_holonomy(&g, &QuadrilateralSpec::new(&g, o, *t, *s))
            .map_err(|e| e.to_string())?;
        product_max = product_max.max(h.value.abs());
    }
    let f = example();
    let defect = integrability_defect(&f, &o, &pairs).map_err(|e| e.to_string())?;
    let mut additivity: f64 = 0.0;
    for (t, s) in [(0.4, 0.4), (0.3, -0.2), (-0.36, 0.16)] {
        let whole = quadrilateral_holonomy(&f, &QuadrilateralSpec::new(&f, o, t, s))
            .map_err(|e| e.to_string())?;
        let mut parts = 0.0;
        for (u0, s0) in [
            (0.0, 0.0),
            (t / 2.0, 0.0),
            (0.0, s / 2.0),
            (t / 2.0, s / 2.0),
        ] {
            let q = QuadrilateralSpec::new(&f, o, t / 2.0, s / 2.0).with_offset(u0, s0);
            parts += quadrilateral_holonomy(&f, &q)
                .map_err(|e| e.to_string())?
                .value;
        }
        additivity = additivity.max((parts - whole.value).abs());
    }
    ensure(
        product_max < 1e-12 && defect > 1e-6 && additivity < 1e-10,
        format!("product max |H| = {product_max:.1e}, defect = {defect:.3e}, additivity error = {additivity:.1e}"),
    )
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn leaf_geometry() -> Check {
    let f = example();
    let e = *f.base_map().eigen();
    let err = |e: LeafError| e.to_string();

    // contraction of stable-leaf pairs; the fixed-point rounding of the leaf
    // point grows like a_u^n, so iterate directly to n = 18 and use the exact
    // cover displacement plus series remainder up to n = 40
    let x = FiberedPoint::new(TorusPoint2::new(0.02, -0.03), 0.1);
    let t = 0.2;
    let chart = StableLeafChart::new(&f, x, 120);
    let (mut p, mut q) = (x, chart.point(&f, t).map_err(err)?);
    let mut direct = Vec::new();
    for n in 0..=18 {
        direct.push((n as f64, p.distance(&q).ln()));
        p = f.apply(&p);
        q = f.apply(&q);
    }
    let direct_rate = fit_slope(&direct).exp();
    let mut base = x.base;
    let mut remainder = chart.offset(&f, t).map_err(err)?.value;
    let mut series = Vec::new();
    for n in 0..=40 {
        let shift = t * e.a_s.powi(n);
        let gap = shift * e.v_s[0].abs().max(e.v_s[1].abs());
        series.push((n as f64, gap.max(remainder.abs()).ln()));
        remainder -= f.phi(&base) - f.phi_displaced(&base, &[shift * e.v_s[0], shift * e.v_s[1]]);
        base = f.base_map().apply(&base);
    }
    let series_rate = fit_slope(&series).exp();

    let mut invariance: f64 = 0.0;
    let image = StableLeafChart::new(&f, f.apply(&x), 80);
    let chart = StableLeafChart::new(&f, x, 80);
    for t in [-0.4, -0.1, 0.2, 0.45] {
        let a = f.apply(&chart.point(&f, t).map_err(err)?);
        invariance = invariance.max(a.distance(&image.point(&f, t * e.a_s).map_err(err)?));
    }
    let y = FiberedPoint::new(TorusPoint2::new(0.0, 0.03), 0.2);
    let pre = LegPolicy::default_for(&f)
        .preorbit(&f, &y, 60)
        .map_err(|e| e.to_string())?;
    let uchart = UnstableLeafChart::new(pre.clone());
    let uimage = UnstableLeafChart::new(pre.image(&f));
    for t in [-0.12, 0.05, 0.14] {
        let a = f.apply(&uchart.point(&f, t).map_err(err)?);
        invariance = invariance.max(a.distance(&uimage.point(&f, t * e.a_u).map_err(err)?));
    }

    let start = FiberedPoint::new(TorusPoint2::new(0.525, 0.525), 0.525);
    let r_example = leaf_density_radius(&f, &start, 1e4, 20);
    let r_product = leaf_density_radius(&product(), &start, 1e4, 20);
    let rate_ok =
        (direct_rate / e.a_s - 1.0).abs() < 0.05 && (series_rate / e.a_s - 1.0).abs() < 0.05;
    ensure(
        rate_ok && invariance < 1e-9 && r_example < 0.05 && r_product >= 0.2,
        format!(
            "rate/a_s = {:.4} (n<=18), {:.4} (n<=40); invariance {invariance:.1e}; covering radius {r_example:.4} vs product {r_product:.3}",
            direct_rate / e.a_s,
            series_rate / e.a_s
        ),
    )
}

fn accessibility() -> Check {
    let f = example();
    let o = FiberedPoint::origin();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let to = FiberedPoint::uniform(&mut stream_rng(SEED ^ 7, i));
        let path = build_su_path(&f, &o, &to, 1e-4).map_err(|e| format!("target {i}: {e}"))?;
        path.verify(&f).map_err(|e| format!("target {i}: {e}"))?;
        worst = worst.max(circle_distance(path.end().theta(), to.theta()));
    }
    let g = product();
    let mut refused = 0;
    for i in 0..5 {
        let from = FiberedPoint::uniform(&mut stream_rng(SEED ^ 8, i));
        let to = from.rotated(0.1 + 0.15 * i as f64);
        if let Err(LeafError::NotAccessibleNumerically { .. }) = build_su_path(&g, &from, &to, 1e-4)
        {
            refused += 1;
        }
    }
    ensure(
        worst < 1e-4 && refused == 5,
        format!("20/20 targets reached, max fiber error {worst:.1e}; product refused {refused}/5 fiber shifts"),
    )
}

fn transitivity() -> Check {
    let center = FiberedPoint::new(TorusPoint2::new(0.525, 0.525), 0.525);
    let a = box_transitivity(&example(), &center, 0.05, 20, 10_000, 1000, SEED).fraction;
    let b = box_transitivity(&product(), &center, 0.05, 20, 10_000, 1000, SEED).fraction;
    let bound = slab_bound(&center, 0.05, 20);
    ensure(
        a >= 0.99 && b <= bound && bound < 0.5,
        format!("coverage {a:.4}, product {b:.4} <= slab bound {bound}"),
    )
}

fn ergodicity() -> Check {
    let n = 1_000_000;
    let a = birkhoff_dispersion(&example(), Observable::CosFiber, 100, n, SEED).dispersion;
    let b = birkhoff_dispersion(&doubling(), Observable::CosFiber, 100, n, SEED).dispersion;
    let c = birkhoff_dispersion(&product(), Observable::CosFiber, 100, n, SEED).dispersion;
    ensure(
        a < 0.05 && b < 0.05 && c > 0.5,
        format!(
            "dispersion {a:.4} (torus), {b:.4} (doubling), {c:.4} (product, baseline {:.4})",
            0.5f64.sqrt()
        ),
    )
}

fn srb() -> Check {
    let f = example();
    let err = |e: LeafError| e.to_string();
    let pre = LegPolicy::default_for(&f)
        .preorbit(&f, &FiberedPoint::origin(), 60)
        .map_err(|e| e.to_string())?;
    let chart = UnstableLeafChart::new(pre.clone());
    let self_ratio = srb_delta_u(&f, &pre, &pre, 40).map_err(err)?.value;
    let mut cocycle: f64 = 0.0;
    for (ty, tz) in [(0.1, -0.15), (0.25, 0.05), (-0.2, 0.3)] {
        let y = chart.shadow(&f, ty).map_err(err)?;
        let z = chart.shadow(&f, tz).map_err(err)?;
        let xy = srb_delta_u(&f, &pre, &y, 40).map_err(err)?.value;
        let yz = srb_delta_u(&f, &y, &z, 40).map_err(err)?.value;
        let xz = srb_delta_u(&f, &pre, &z, 40).map_err(err)?.value;
        cocycle = cocycle.max((xy * yz - xz).abs());
    }
    let d = srb_density(&f, &pre, 0.3, 201).map_err(err)?;
    let g = product();
    let gpre = LegPolicy::default_for(&g)
        .preorbit(&g, &FiberedPoint::origin(), 60)
        .map_err(|e| e.to_string())?;
    let flat = srb_density(&g, &gpre, 0.3, 201).map_err(err)?;
    let normalization = (d.integral() - 1.0).abs();
    ensure(
        self_ratio == 1.0 && cocycle < 1e-8 && normalization < 1e-8 && flat.uniform_deviation() == 0.0,
        format!(
            "delta(x,x) = {self_ratio}, cocycle error {cocycle:.1e}, normalization error {normalization:.1e}, product deviation {}",
            flat.uniform_deviation()
        ),
    )
}

fn center_exponent() -> Check {
    let mut details = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, m: skewlab::MeanEstimate, lambda_c: &[f64]| {
        let l = batch_means(lambda_c, BATCHES);
        let combined = (m.std_error.powi(2) + l.std_error.powi(2)).sqrt();
        let gap = (m.mean - l.mean).abs();
        ok &= m.mean.abs() < 2e-3 && gap <= 3.0 * combined;
        details.push(format!(
            "{name} {:.1e} (se {:.1e}, gap to lambda_c {gap:.1e})",
            m.mean, m.std_error
        ));
    };
    let f = example();
    let lc: Vec<f64> = lyapunov_ensemble(&f, 20, 100_000, SEED)
        .iter()
        .map(|r| r.1.lambda_c)
        .collect();
    check("torus", mean_center_exponent(&f, 100, 10_000, SEED), &lc);
    let g = product();
    let lc: Vec<f64> = lyapunov_ensemble(&g, 20, 100_000, SEED)
        .iter()
        .map(|r| r.1.lambda_c)
        .collect();
    check("product", mean_center_exponent(&g, 100, 10_000, SEED), &lc);
    let h = doubling();
    let lc: Vec<f64> = (0..20)
        .map(|i| {
            let x = FiberedPoint::uniform(&mut stream_rng(SEED, i));
            lyapunov_spectrum(&h, &x, 100_000, i).exponents[0]
        })
        .collect();
    check("doubling", mean_center_exponent(&h, 100, 10_000, SEED), &lc);
    let pesin = pesin_entropy_estimate(&f, 100, 10_000, SEED).map_err(|e| e.to_string())?;
    let target = (2.0 + 2f64.sqrt()).ln();
    ok &= (pesin.mean - target).abs() < 2e-3;
    details.push(format!("pesin {:.7} vs {target:.7}", pesin.mean));
    ensure(ok, details.join("; "))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_all(config: &Path, out: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_skewlab"))
        .args(["all", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("SKEWLAB_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!(
            "{} exited with {}",
            config.display(),
            status.status
        ));
    }
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(out).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn reproducibility() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut configs: Vec<PathBuf> = fs::read_dir(configs_dir())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    configs.sort();
    let mut csvs = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let a = run_all(cfg, &tmp.path().join(format!("{i}a")), "1")?;
        let b = run_all(cfg, &tmp.path().join(format!("{i}b")), "4")?;
        if a != b {
            let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
            return Err(format!(
                "{}: CSVs differ between runs: {differing:?}",
                cfg.display()
            ));
        }
        csvs += a.len();
    }
    ensure(
        !configs.is_empty(),
        format!(
            "{} configs exit 0, {csvs} CSVs bit-identical across 1 and 4 threads",
            configs.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("structure", structure),
        ("derivative", derivative),
        ("exponents", exponents),
        ("unstable spread", spread),
        ("non-integrability", non_integrability),
        ("leaf geometry", leaf_geometry),
        ("accessibility", accessibility),
        ("transitivity", transitivity),
        ("ergodicity", ergodicity),
        ("srb", srb),
        ("center exponent", center_exponent),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
