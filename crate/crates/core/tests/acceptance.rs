//! End-to-end acceptance checks, one line per criterion.

mod common;

use std::f64::consts::{PI, TAU};
use std::io::Cursor;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_pattern_probabilities, exact_povm_weight, pooled_z_scores, stirling_by_surjections,
};
use spdc_metrology::calibration::{
    calibrate, pair_probability, simulate_rates, tau_from_pair_probability,
};
use spdc_metrology::detector::{lossless_weights, stirling2};
use spdc_metrology::engine::{detection_probability, fourfold_distribution, pattern_distribution};
use spdc_metrology::estimation::{
    fisher_information, fisher_maximum, fit_fringes, monte_carlo_ml_fisher, snl_fisher,
    FringeSample, MonteCarloConfig, PhaseFamily, TheoryFamily,
};
use spdc_metrology::heralding::herald_table;
use spdc_metrology::timetag::{
    count_coincidences, generate_synthetic_timetags, parse_timetags, write_binary, ChannelMap,
    CounterConfig, Format, ParseOptions, SyntheticConfig, TimetagRecord,
};
use spdc_metrology::{
    Arity, DetectionPattern, DetectorModel, PovmTable, RotationSpec, SourceParams,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const HERALD_ETAS: [f64; 5] = [0.7, 0.8, 0.9, 0.95, 1.0];

const HERALD_TAU_005: [[f64; 5]; 4] = [
    [0.48994, 0.64043, 0.81125, 0.90431, 1.0025],
    [0.69835, 0.79934, 0.90071, 0.95155, 1.0025],
    [0.79119, 0.95866, 1.13993, 1.23574, 1.335],
    [0.85610, 1.08952, 1.35927, 1.50862, 1.66806],
];

const HERALD_TAU_010: [[f64; 5]; 4] = [
    [0.48964, 0.64159, 0.81493, 0.90974, 1.01003],
    [0.69331, 0.79726, 0.90281, 0.95621, 1.01003],
    [0.78482, 0.95468, 1.13974, 1.238, 1.34004],
    [0.84795, 1.08358, 1.35745, 1.50959, 1.67226],
];

fn herald_tables() -> Outcome {
    let start = Instant::now();
    let mut worst: (f64, String) = (0.0, String::new());
    for (tau, expected) in [(0.05, &HERALD_TAU_005), (0.1, &HERALD_TAU_010)] {
        let table = herald_table(tau, &HERALD_ETAS, &[0, 1, 2, 3]).map_err(|e| e.to_string())?;
        for (k, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                let diff = (table.cells[k][j].value - want).abs();
                if diff > worst.0 {
                    worst = (diff, format!("tau={tau} K={k} eta={}", HERALD_ETAS[j]));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst.0 <= 1e-3 && secs < 60.0,
        format!(
            "40 cells, max |diff| {:.2e} at {}, {secs:.2} s",
            worst.0, worst.1
        ),
    )
}

fn povm_oracle() -> Outcome {
    let mut cells = 0;
    for d in 2..=4 {
        for c in 0..=8 {
            for r in 0..=d {
                let exact = exact_povm_weight(d, r, c);
                let want = *exact.numer() as f64 / *exact.denom() as f64;
                let got = lossless_weights(d, r, c).map_err(|e| e.to_string())?;
                if got != want {
                    return Err(format!("d={d} r={r} c={c}: {got} vs {exact}"));
                }
                if r <= c
                    && c <= 8
                    && stirling2(c, r).map(|s| s as u64) != Some(stirling_by_surjections(c, r))
                {
                    return Err(format!("S({c},{r}) disagrees with surjection count"));
                }
                cells += 1;
            }
        }
    }
    let t = PovmTable::lossless(Arity::Multiplexed(4), 2).map_err(|e| e.to_string())?;
    check(
        t.weight(1, 2) == 0.25 && t.weight(2, 2) == 0.75,
        format!(
            "{cells} weights equal exact fractions; w_1(2)={} w_2(2)={}",
            t.weight(1, 2),
            t.weight(2, 2)
        ),
    )
}

fn completeness() -> Outcome {
    let mut worst_w = 0.0f64;
    let arities = (1..=8)
        .map(Arity::Multiplexed)
        .chain([Arity::PerfectCounting]);
    for a in arities {
        for eta in [0.0, 0.12, 0.23, 0.5, 0.77, 0.9, 1.0] {
            let t = PovmTable::lossless(a, 20)
                .and_then(|t| t.with_loss(eta))
                .map_err(|e| e.to_string())?;
            for c in 0..=20 {
                let total: f64 = (0..=t.max_clicks()).map(|r| t.weight(r, c)).sum();
                worst_w = worst_w.max((total - 1.0).abs());
            }
        }
    }
    let src = SourceParams::new(0.1).map_err(|e| e.to_string())?;
    let mut worst_p = 0.0f64;
    for (a, eta_a, eta_b) in [
        (Arity::Multiplexed(4), 0.23, 0.12),
        (Arity::PerfectCounting, 1.0, 1.0),
    ] {
        let det = DetectorModel::for_source(a, eta_a, eta_b, &src).map_err(|e| e.to_string())?;
        for i in 0..100 {
            let phi = TAU * i as f64 / 100.0;
            let dist = pattern_distribution(RotationSpec::sensing(phi), &src, &det)
                .map_err(|e| e.to_string())?;
            worst_p = worst_p.max((dist.total() - 1.0).abs());
        }
    }
    check(
        worst_w <= 1e-12 && worst_p <= src.trunc_epsilon(),
        format!(
            "max |sum w - 1| {worst_w:.1e}; max |sum P - 1| {worst_p:.1e} (eps {:.0e})",
            src.trunc_epsilon()
        ),
    )
}

fn brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let cases = 24;
    for case in 0..cases {
        let tau = rng.random_range(0.02..0.09);
        let d = [Some(1), Some(2), Some(3), Some(4), Some(6), None][case % 6];
        let arity = d.map_or(Arity::PerfectCounting, Arity::Multiplexed);
        let (phi, theta) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let (eta_a, eta_b) = (rng.random_range(0.05..=1.0), rng.random_range(0.05..=1.0));
        let src = SourceParams::new(tau).map_err(|e| e.to_string())?;
        let n_max = src.n_max().map_err(|e| e.to_string())?;
        let det =
            DetectorModel::for_source(arity, eta_a, eta_b, &src).map_err(|e| e.to_string())?;
        let oracle = brute_pattern_probabilities(tau, n_max, phi, theta, d, eta_a, eta_b);
        let rot = RotationSpec::new(phi, theta);
        let limit = det.max_clicks().min(6);
        for a_h in 0..=limit {
            for a_v in 0..=limit {
                for b_h in 0..=limit {
                    for b_v in 0..=limit {
                        let r = DetectionPattern::new(a_h, a_v, b_h, b_v);
                        if r.total() > 6 {
                            continue;
                        }
                        let got = detection_probability(&r, rot, &src, &det)
                            .map_err(|e| e.to_string())?;
                        let want = oracle.get(&[a_h, a_v, b_h, b_v]).copied().unwrap_or(0.0);
                        worst = worst.max((got - want).abs());
                        compared += 1;
                    }
                }
            }
        }
    }
    check(
        worst <= 1e-10,
        format!("{cases} random cases, {compared} patterns, max |diff| {worst:.1e}"),
    )
}

fn experiment() -> Result<(SourceParams, DetectorModel), String> {
    let src = SourceParams::new(0.061).map_err(|e| e.to_string())?;
    let det = DetectorModel::for_source(Arity::Multiplexed(4), 0.23, 0.12, &src)
        .map_err(|e| e.to_string())?;
    Ok((src, det))
}

fn snl_anchor() -> Outcome {
    let (src, _) = experiment()?;
    let snl = snl_fisher(&src).map_err(|e| e.to_string())?;
    check((snl - 2.01).abs() <= 0.01, format!("SNL {snl:.5}"))
}

fn advantage() -> Outcome {
    let (src, det) = experiment()?;
    let family = TheoryFamily::fourfold(0.0, &src, &det).map_err(|e| e.to_string())?;
    let best = fisher_maximum(&family, 0.0, PI, 721, 1e-12);
    let snl = snl_fisher(&src).map_err(|e| e.to_string())?;
    let adv = best.value / snl - 1.0;
    check(
        (adv - 0.45).abs() <= 0.03,
        format!(
            "max I {:.5} at phi {:.4}, advantage {:.4}",
            best.value, best.phi, adv
        ),
    )
}

fn flatness() -> Outcome {
    let src = SourceParams::new(0.05).map_err(|e| e.to_string())?;
    let det = DetectorModel::for_source(Arity::PerfectCounting, 1.0, 1.0, &src)
        .map_err(|e| e.to_string())?;
    let family = TheoryFamily::unconditioned(0.0, &src, &det).map_err(|e| e.to_string())?;
    let values: Vec<f64> = (0..360)
        .map(|i| fisher_information(&family, TAU * i as f64 / 360.0).value)
        .collect();
    let hi = values.iter().cloned().fold(f64::MIN, f64::max);
    let lo = values.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    check(
        spread < 0.01,
        format!("I in [{lo:.6}, {hi:.6}], relative spread {spread:.2e}"),
    )
}

fn cramer_rao() -> Outcome {
    let (src, det) = experiment()?;
    let family = TheoryFamily::fourfold(0.0, &src, &det).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (j, phi) in [0.8, 1.1, 2.2].into_iter().enumerate() {
        let cfg = MonteCarloConfig::new(phi, 1000, 500, 31 + j as u64);
        let r = monte_carlo_ml_fisher(&family, &cfg).map_err(|e| e.to_string())?;
        let rel = r.i_ml / r.fisher - 1.0;
        worst = worst.max(rel.abs());
        parts.push(format!(
            "phi={phi}: I={:.4} I_ML={:.4}±{:.4} (raw {:.4}±{:.4})",
            r.fisher, r.i_ml, r.std_error, r.i_ml_raw, r.raw_std_error
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 0.05 && secs < 300.0,
        format!("{}; max rel {worst:.3}, {secs:.1} s", parts.join("; ")),
    )
}

fn calibration() -> Outcome {
    let (src, det) = experiment()?;
    let rates = simulate_rates(&src, &det).map_err(|e| e.to_string())?;
    let res = calibrate(&rates, Arity::Multiplexed(4)).map_err(|e| e.to_string())?;
    let rel = [(res.tau, 0.061), (res.eta_a, 0.23), (res.eta_b, 0.12)]
        .iter()
        .map(|(got, want)| (got / want - 1.0).abs())
        .fold(0.0, f64::max);
    let mut inverse = 0.0f64;
    for i in 1..=200 {
        let tau = 0.0055 * i as f64;
        let t = tau.tanh().powi(2);
        if t >= 1.0 / 3.0 - 1e-6 {
            break;
        }
        let back = tau_from_pair_probability(pair_probability(tau)).map_err(|e| e.to_string())?;
        inverse = inverse.max((back.tau - tau).abs());
    }
    check(
        rel <= 0.02 && inverse <= 1e-10,
        format!(
            "tau {:.5} eta_a {:.5} eta_b {:.5}, max rel error {rel:.2e}; cubic inverse max error {inverse:.1e}",
            res.tau, res.eta_a, res.eta_b
        ),
    )
}

fn ingestion() -> Outcome {
    let pulses = 1_000_000u64;
    let src = SourceParams::new(0.3).map_err(|e| e.to_string())?;
    let det = DetectorModel::for_source(Arity::Multiplexed(4), 0.6, 0.5, &src)
        .map_err(|e| e.to_string())?;
    let rot = RotationSpec::sensing(1.0);
    let records = generate_synthetic_timetags(rot, &src, &det, &SyntheticConfig::new(pulses, 99))
        .map_err(|e| e.to_string())?;
    let mut bin = Vec::new();
    write_binary(&mut bin, &records).map_err(|e| e.to_string())?;
    let cfg = CounterConfig {
        pulses: Some(pulses),
        ..CounterConfig::default()
    };
    let res = count_coincidences(
        parse_timetags(Cursor::new(&bin), Format::Binary, ParseOptions::default()),
        cfg,
        ChannelMap::default(),
    )
    .map_err(|e| e.to_string())?;
    let counts = res.pattern_counts();
    let dist = pattern_distribution(rot, &src, &det).map_err(|e| e.to_string())?;
    let bins: Vec<(u64, f64)> = dist
        .entries
        .iter()
        .map(|(r, p)| (counts.get(r).copied().unwrap_or(0), *p))
        .collect();
    let z = pooled_z_scores(&bins, pulses);
    let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let copies = 1_000_000usize.div_ceil(records.len().max(1)) as u64;
    let span = pulses * SyntheticConfig::new(pulses, 0).period_ps;
    let mut shifted = Vec::with_capacity(records.len() * copies as usize);
    for k in 0..copies {
        shifted.extend(records.iter().map(|r| TimetagRecord {
            time_ps: r.time_ps + k * span,
            ..*r
        }));
    }
    let mut big = Vec::new();
    write_binary(&mut big, &shifted).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let timed = count_coincidences(
        parse_timetags(Cursor::new(&big), Format::Binary, ParseOptions::default()),
        CounterConfig::default(),
        ChannelMap::default(),
    )
    .map_err(|e| e.to_string())?;
    let rate = timed.records as f64 / start.elapsed().as_secs_f64();
    check(
        worst < 4.0 && res.windows() == pulses && rate >= 1e6,
        format!(
            "{} records, {} bins, max |z| {worst:.2}; {} records at {rate:.3e} records/s",
            res.records,
            z.len(),
            timed.records
        ),
    )
}

fn control_phase() -> Outcome {
    let (src, det) = experiment()?;
    let theta = 80f64.to_radians();
    let fit_at = |offset: f64| -> Result<_, String> {
        let samples: Vec<FringeSample> = (0..24)
            .map(|j| {
                let phi = offset + TAU * j as f64 / 24.0;
                fourfold_distribution(RotationSpec::new(phi, offset), &src, &det).map(|d| {
                    FringeSample {
                        phi,
                        counts: d.probabilities(),
                    }
                })
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        fit_fringes(&samples).map_err(|e| e.to_string())
    };
    let (plain, shifted) = (fit_at(0.0)?, fit_at(theta)?);
    let mut worst = 0.0f64;
    for (a, b) in plain
        .harmonic_magnitudes()
        .iter()
        .zip(shifted.harmonic_magnitudes())
    {
        for s in 0..3 {
            worst = worst.max((a[s] - b[s]).abs());
        }
    }
    let gap = (plain.phi0 - shifted.phi0 - theta).rem_euclid(PI);
    let offset_error = gap.min(PI - gap);

    let extrema = |theta: f64| -> Result<usize, String> {
        let family = TheoryFamily::fourfold(theta, &src, &det).map_err(|e| e.to_string())?;
        let n = 720;
        let v: Vec<f64> = (0..n)
            .map(|i| fisher_information(&family, theta + TAU * i as f64 / n as f64).value)
            .collect();
        Ok((0..n)
            .filter(|&i| {
                let (p, q) = (v[(i + n - 1) % n], v[(i + 1) % n]);
                (v[i] > p && v[i] >= q) || (v[i] < p && v[i] <= q)
            })
            .count())
    };
    let (e0, e80) = (extrema(0.0)?, extrema(theta)?);
    let probe = TheoryFamily::fourfold(theta, &src, &det).map_err(|e| e.to_string())?;
    let base = TheoryFamily::fourfold(0.0, &src, &det).map_err(|e| e.to_string())?;
    let translation = (0..50)
        .map(|i| {
            let phi = TAU * i as f64 / 50.0;
            probe
                .probabilities(phi + theta)
                .iter()
                .zip(base.probabilities(phi))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    check(
        worst <= 1e-6 && offset_error <= 1e-6 && e0 == e80 && translation <= 1e-12,
        format!(
            "max |C_s| diff {worst:.1e}, phase offset error {offset_error:.1e}, extrema {e0} vs {e80}, translation {translation:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("herald table reproduction", herald_tables),
        ("POVM oracle equivalence", povm_oracle),
        ("completeness and normalization", completeness),
        ("brute-force model equivalence", brute_force),
        ("shot-noise anchor", snl_anchor),
        ("theoretical advantage", advantage),
        ("ideal flatness", flatness),
        ("Cramer-Rao saturation", cramer_rao),
        ("calibration round trip", calibration),
        ("ingestion end to end", ingestion),
        ("control-phase shift", control_phase),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
