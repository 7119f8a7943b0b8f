//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! readable scorecard.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fploc_core::divergence::{
    fading_noise_gap, kl_fading_rss, kl_gaussian_rss, robustness_bound, sanov_exponent, DiscreteDistribution, Scenario,
};
use fploc_core::fingerprinting::{build_database, knn_estimate, Fingerprint};
use fploc_core::geometry::{
    cell_covering_radii, euclidean, generate_hex_grid, generate_square_grid, max_covering_radius, modified_voronoi,
    voronoi_diagram, GridKind,
};
use fploc_core::harness::{run_experiment, training_grid, ConfigMap, ExperimentConfig, ExperimentResult};
use fploc_core::hypothesis::{
    empirical_distribution, estimate_error_exponent, hoeffding_bound, ErrorTest, SampleBatch, Sampling,
};
use fploc_core::propagation::{
    mean_rss_linear, sample_rss_fading, sample_rss_noisy, AnalyticChannelParams, Anchor, RssModel,
};
use fploc_core::rng::stream;
use fploc_core::{Point, Region};
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn bern(theta: f64) -> DiscreteDistribution {
    DiscreteDistribution::bernoulli(theta).unwrap()
}

fn n_grid() -> Vec<usize> {
    (50..=300).step_by(50).collect()
}

#[test]
fn c01_stein_exponent_of_typical_set_test() {
    let kl = 0.081093;
    let start = Instant::now();
    let est = estimate_error_exponent(
        &bern(0.6),
        &bern(0.4),
        ErrorTest::TypicalSet { epsilon: 0.02 },
        &n_grid(),
        100_000,
        1,
        Sampling::default(),
    )
    .unwrap();
    let took = start.elapsed();
    let err = rel_err(est.slope, kl);
    let pass = err <= 0.15 && took < Duration::from_secs(120);
    report(
        1,
        "Stein exponent",
        pass,
        &format!("slope {:.5} vs KL {kl}, rel. error {:.1}% (limit 15%), {:.1?}", est.slope, 100.0 * err, took),
    );
}

#[test]
fn c02_chernoff_exponent_of_map_test() {
    let chernoff = 0.22314;
    let start = Instant::now();
    let est = estimate_error_exponent(
        &bern(0.8),
        &bern(0.2),
        ErrorTest::Map { prior1: 0.5 },
        &n_grid(),
        100_000,
        1,
        Sampling::default(),
    )
    .unwrap();
    let took = start.elapsed();
    let err = rel_err(est.slope, chernoff);
    let pass = err <= 0.20 && took < Duration::from_secs(120);
    report(
        2,
        "Chernoff exponent",
        pass,
        &format!("slope {:.5} vs {chernoff}, rel. error {:.1}% (limit 20%), {:.1?}", est.slope, 100.0 * err, took),
    );
}

#[test]
fn c03_hoeffding_bound_holds_on_lattice() {
    let laws = [bern(0.5), bern(0.2), DiscreteDistribution::new(vec![0.2, 0.3, 0.5]).unwrap()];
    let trials = 10_000;
    let mut violations = Vec::new();
    let mut points = 0;
    for (li, p) in laws.iter().enumerate() {
        for n in [50, 100, 200] {
            for a in [0.05, 0.1, 0.2] {
                let mut r = stream(3, &[li as u64, n as u64, (a * 100.0) as u64]);
                let mut hits = vec![0usize; p.alphabet_size()];
                for _ in 0..trials {
                    let q = empirical_distribution(&SampleBatch::draw(p, n, &mut r), p.alphabet_size()).unwrap();
                    for (x, h) in hits.iter_mut().enumerate() {
                        if (q.prob(x) - p.prob(x)).abs() >= a {
                            *h += 1;
                        }
                    }
                }
                let bound = hoeffding_bound(n, a);
                for (x, &h) in hits.iter().enumerate() {
                    points += 1;
                    let freq = h as f64 / trials as f64;
                    if freq > bound {
                        violations.push(format!("law {li} n={n} a={a} x={x}: {freq} > {bound:.4}"));
                    }
                }
            }
        }
    }
    report(
        3,
        "Hoeffding bound",
        violations.is_empty(),
        &format!("{} violations over {points} lattice points {:?}", violations.len(), violations),
    );
}

#[test]
fn c04_sanov_exponent_matches_binary_closed_form() {
    let p = bern(0.5);
    let mut worst = 0.0f64;
    for a in [0.1, 0.2, 0.3] {
        let q: f64 = 0.5 + a;
        let exact = q * (q / 0.5).ln() + (1.0 - q) * ((1.0 - q) / 0.5).ln();
        worst = worst.max((sanov_exponent(&p, a).unwrap() - exact).abs());
    }
    report(4, "Sanov exponent", worst <= 1e-3, &format!("max |error| {worst:.2e} nats (limit 1e-3)"));
}

/// Random anchors and point pair inside a 10 m square, redrawn until the
/// divergence is large enough for a 2% Monte Carlo check to be meaningful.
fn random_configuration<R: Rng>(r: &mut R, params: AnalyticChannelParams, kl_min: f64) -> (Scenario, Point, Point) {
    let pt = |r: &mut R| Point::new(10.0 * r.random::<f64>(), 10.0 * r.random::<f64>());
    loop {
        let anchors = (0..3)
            .map(|_| Anchor::new(pt(r), 0.5 + r.random::<f64>()).unwrap())
            .collect();
        let scen = Scenario::new(anchors, params).unwrap();
        let (u1, u2) = (pt(r), pt(r));
        let near = scen.anchors.iter().any(|a| a.location.distance(&u1) < 0.5 || a.location.distance(&u2) < 0.5);
        let kl = match params.model {
            fploc_core::propagation::ChannelModel::Noisy => kl_gaussian_rss(&u1, &u2, &scen).unwrap(),
            fploc_core::propagation::ChannelModel::Fading => kl_fading_rss(&u1, &u2, &scen).unwrap(),
        };
        if !near && kl >= kl_min {
            return (scen, u1, u2);
        }
    }
}

#[test]
fn c05_closed_form_divergences_match_sampled_llr() {
    let draws = 1_000_000;
    let mut worst = 0.0f64;
    let mut r = stream(5, &[0]);

    let noisy = AnalyticChannelParams::noisy(2.0, 0.0, 1e-4).unwrap();
    for c in 0..10u64 {
        let (scen, u1, u2) = random_configuration(&mut r, noisy, 0.1);
        let mut s = stream(5, &[1, c]);
        let nv = noisy.quant_noise_var;
        let mut total = 0.0;
        for _ in 0..draws {
            for a in &scen.anchors {
                let (m1, m2) = (mean_rss_linear(&u1, a, &noisy), mean_rss_linear(&u2, a, &noisy));
                let y = sample_rss_noisy(&u1, a, &noisy, &mut s);
                total += ((y - m2).powi(2) - (y - m1).powi(2)) / (2.0 * nv);
            }
        }
        worst = worst.max(rel_err(total / draws as f64, kl_gaussian_rss(&u1, &u2, &scen).unwrap()));
    }

    let fading = AnalyticChannelParams::fading(2.0, 0.0).unwrap();
    for c in 0..10u64 {
        let (scen, u1, u2) = random_configuration(&mut r, fading, 0.01);
        let mut s = stream(5, &[2, c]);
        let mut total = 0.0;
        for _ in 0..draws {
            for a in &scen.anchors {
                // The closed form is the divergence of the law at u2 from the law at u1.
                let (m1, m2) = (mean_rss_linear(&u1, a, &fading), mean_rss_linear(&u2, a, &fading));
                let y = sample_rss_fading(&u2, a, &fading, &mut s);
                total += (m1 / m2).ln() - y / m2 + y / m1;
            }
        }
        worst = worst.max(rel_err(total / draws as f64, kl_fading_rss(&u1, &u2, &scen).unwrap()));
    }
    report(
        5,
        "KL closed forms",
        worst <= 0.02,
        &format!("worst rel. error {:.2}% over 10 Gaussian + 10 fading configurations (limit 2%)", 100.0 * worst),
    );
}

#[test]
fn c06_robustness_bound_has_no_violations() {
    let (alpha, p_t, n1, d) = (2.0, 100.0, 1e-3, 10.0);
    let scen = Scenario::new(
        vec![Anchor::new(Point::new(0.0, 0.0), p_t).unwrap()],
        AnalyticChannelParams::noisy(alpha, 0.0, n1).unwrap(),
    )
    .unwrap();
    let mut r = stream(6, &[]);
    let pairs: Vec<(f64, f64)> = (0..10_000)
        .map(|_| (d * (1.0 - r.random::<f64>()), d * (1.0 - r.random::<f64>())))
        .collect();
    let mut detail = Vec::new();
    let mut violations = 0;
    for l in [1e-3, 1e-2, 1e-1] {
        let bound = robustness_bound(l, d, alpha, p_t, n1);
        let mut within = 0;
        for &(x1, x2) in &pairs {
            if kl_gaussian_rss(&Point::new(x1, 0.0), &Point::new(x2, 0.0), &scen).unwrap() <= l {
                within += 1;
                if (x1 - x2).abs() > bound {
                    violations += 1;
                }
            }
        }
        detail.push(format!("L={l}: {within} pairs"));
    }
    report(
        6,
        "robustness bound",
        violations == 0,
        &format!("{violations} violations ({})", detail.join(", ")),
    );
}

#[test]
fn c07_fading_divergence_dominates_noise_term() {
    let anchor = Anchor::new(Point::new(0.0, 0.0), 1.0).unwrap();
    let mut r = stream(7, &[]);
    let (mut checked, mut violations) = (0, 0);
    while checked < 10_000 {
        let mut pt = || Point::new(20.0 * r.random::<f64>() - 10.0, 20.0 * r.random::<f64>() - 10.0);
        let (a, b) = (pt(), pt());
        let alpha = 1.5 + 2.5 * r.random::<f64>();
        // `u1` is the point nearer the anchor.
        if a.distance(&anchor.location).min(b.distance(&anchor.location)) <= 1.0 {
            continue;
        }
        checked += 1;
        let (f, c) = fading_noise_gap(&a, &b, &anchor, alpha);
        if f < c {
            violations += 1;
        }
    }
    report(7, "fading vs noise", violations == 0, &format!("{violations} violations over {checked} pairs"));
}

#[test]
fn c08_interior_covering_radii() {
    let r = Region::with_size(30.0, 30.0).unwrap();
    let mut errs = Vec::new();
    for (kind, want) in [(GridKind::Hexagonal, 3f64.sqrt()), (GridKind::Square, 3.0 / 2f64.sqrt())] {
        let g = match kind {
            GridKind::Hexagonal => generate_hex_grid(&r, 3.0).unwrap(),
            _ => generate_square_grid(&r, 3.0).unwrap(),
        };
        let vd = voronoi_diagram(&g.points, &r).unwrap();
        let i = vd.nearest_site(&r.center());
        errs.push(rel_err(vd.covering_radius(i).unwrap(), want));
    }
    let pass = errs.iter().all(|&e| e <= 1e-9);
    report(8, "covering radii", pass, &format!("relative errors hex {:.1e}, square {:.1e}", errs[0], errs[1]));
}

fn parse_config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_map(&ConfigMap::parse(text, ".").unwrap()).unwrap()
}

#[test]
fn c09_noiseless_errors_within_modified_voronoi_radius() {
    let res = 0.1;
    let cfg = parse_config("cost231.sigma = 0\nknn.k = 1\n");
    let grid = training_grid(&cfg).unwrap();
    let anchors = cfg.base_anchors.clone();
    let model: &RssModel = &cfg.model;
    let db = build_database(&grid, &anchors, model, 1, cfg.master_seed).unwrap();
    let lm = modified_voronoi(&grid, |p| model.mean_vector(p, &anchors), euclidean, res).unwrap();
    let radii = cell_covering_radii(&grid, &lm).unwrap();

    let mut violations = 0;
    let mut delta_max = 0.0f64;
    for (_, _, p, label) in lm.cells() {
        let mean = model.mean_vector(&p, &anchors);
        let query = Fingerprint {
            per_anchor_count: vec![1; mean.len()],
            per_anchor_mean: mean,
        };
        let err = knn_estimate(&db, &query, 1, false).unwrap().distance(&p);
        delta_max = delta_max.max(err);
        if err > radii[label] + res {
            violations += 1;
        }
    }
    let rmax = max_covering_radius(&grid, &lm).unwrap();
    let pass = violations == 0 && (delta_max - rmax).abs() <= res;
    report(
        9,
        "Corollary 1",
        pass,
        &format!("{violations} raster violations; max error {delta_max:.3} m vs max covering radius {rmax:.3} m"),
    );
}

fn medians(res: &ExperimentResult) -> Vec<f64> {
    res.rows.iter().map(|r| r.stats.median).collect()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

/// Grid used from the measurement-count study onwards.
const HEX_105: &str = "grid.kind = hex\ngrid.points = 105\n";

#[test]
fn c10_grid_shape_direction() {
    let start = Instant::now();
    let cfg = parse_config("grid.points = 40\nsweep.param = grid.kind\nsweep.values = hex, square, random\n");
    let m = medians(&run_experiment(&cfg).unwrap());
    let took = start.elapsed();
    let pass = m[0] <= m[1] + 0.1 && m[1] < m[2] && took < Duration::from_secs(300);
    report(10, "grid shape", pass, &format!("median hex/square/random = {} m, {took:.1?}", fmt(&m)));
}

#[test]
fn c11_measurement_count_direction() {
    let cfg = parse_config(&format!("{HEX_105}sweep.param = measure.both\nsweep.values = 1, 5, 10, 15\n"));
    let m = medians(&run_experiment(&cfg).unwrap());
    let pass = m.windows(2).all(|w| w[1] - w[0] <= 0.05);
    report(11, "measurement count", pass, &format!("medians for m = 1, 5, 10, 15: {} m", fmt(&m)));
}

#[test]
fn c12_fading_and_shadowing_direction() {
    let g = medians(&run_experiment(&parse_config(&format!(
        "{HEX_105}sweep.param = cost231.gamma\nsweep.values = 1.5, 3.5\n"
    )))
    .unwrap());
    let w = medians(&run_experiment(&parse_config(&format!(
        "{HEX_105}sweep.param = cost231.wall_loss\nsweep.values = 2, 7\n"
    )))
    .unwrap());
    let pass = g[1] < g[0] && w[1] < w[0];
    report(
        12,
        "fading and shadowing",
        pass,
        &format!("gamma 1.5 -> 3.5: {} m; wall loss 2 -> 7: {} m", fmt(&g), fmt(&w)),
    );
}

#[test]
fn c13_voronoi_placement_direction() {
    let voronoi = medians(&run_experiment(&parse_config(&format!(
        "{HEX_105}sweep.param = placement.count\nsweep.values = 0, 2, 6\n"
    )))
    .unwrap());
    let (mut wins6, mut wins10) = (0, 0);
    let mut random = Vec::new();
    for seed in 1..=5 {
        let m = medians(&run_experiment(&parse_config(&format!(
            "{HEX_105}placement.method = random\nplacement.seed = {seed}\n\
             sweep.param = placement.count\nsweep.values = 2, 6\n"
        )))
        .unwrap());
        wins6 += (voronoi[1] < m[0]) as u32;
        wins10 += (voronoi[2] < m[1]) as u32;
        random.push(format!("({})", fmt(&m)));
    }
    let pass = wins6 >= 4 && wins10 >= 4 && voronoi[2] < voronoi[0];
    report(
        13,
        "anchor placement",
        pass,
        &format!(
            "Voronoi 4/6/10 APs: {} m; random 6/10 APs: {}; Voronoi wins {wins6}/5 at 6 APs, {wins10}/5 at 10 APs",
            fmt(&voronoi),
            random.join(" ")
        ),
    );
}

fn fploc(args: &[&str], threads: usize) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_fploc"))
        .args(args)
        .args(["--threads", &threads.to_string()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn c14_output_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_owned()
    };
    let sim = write(
        "sim.cfg",
        "run.trials = 2000\nsweep.param = grid.kind\nsweep.values = hex, random\n",
    );
    let spatial = write("spatial.cfg", "spatial.resolution = 2\nspatial.trials = 5\n");
    let expo = write("expo.cfg", "exponent.trials = 10000\nexponent.test = np\n");
    let place = write("place.cfg", "placement.method = random\nplacement.count = 3\n");
    let train = write_trace(dir.path());

    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--config", &sim, "--seed", "9", "--raw"],
        vec!["spatial-map", "--config", &spatial, "--seed", "9"],
        vec!["analyze-kl", "--seed", "9"],
        vec!["exponent", "--config", &expo, "--seed", "9"],
        vec!["place-anchors", "--config", &place, "--seed", "9"],
        vec!["ingest-trace", &train],
        vec!["evaluate-trace", &train, &train],
    ];
    let mut differing = Vec::new();
    for args in &cases {
        if fploc(args, 1) != fploc(args, 8) {
            differing.push(args[0]);
        }
    }
    report(
        14,
        "determinism",
        differing.is_empty(),
        &format!("{} of {} subcommands differ between 1 and 8 threads {differing:?}", differing.len(), cases.len()),
    );
}

fn write_trace(dir: &Path) -> String {
    let mut text = String::from(fploc_core::harness::TRACE_HEADER);
    text.push('\n');
    let mut r = stream(14, &[]);
    for loc in 0..12 {
        let (x, y) = ((loc % 4) as f64 * 3.0, (loc / 4) as f64 * 3.0);
        for sample in 0..3 {
            for ap in ["aa:01", "aa:02", "aa:03"] {
                let rss = -40.0 - 30.0 * r.random::<f64>();
                text.push_str(&format!("{loc},{x},{y},{ap},{rss:.2},{sample}\n"));
            }
        }
    }
    let p = dir.join("trace.csv");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}
