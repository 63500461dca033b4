//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's numerical core: the state is built
//! as a polynomial in creation operators, rotated by substituting the mode
//! transformation, and detected by enumerating where every photon goes.

#![allow(dead_code)]

use std::collections::HashMap;

use num_rational::Ratio;

/// Exponents of `(a_h^dag, a_v^dag, b_h^dag, b_v^dag)`.
pub type Monomial = [u32; 4];
pub type Poly = HashMap<Monomial, f64>;

/// Number of ways `c` photons land on `d` detectors lighting exactly `r` of them,
/// as an exact fraction of all `d^c` assignments.
pub fn exact_povm_weight(d: u32, r: u32, c: u32) -> Ratio<u64> {
    let total = (d as u64).pow(c);
    let mut hits = 0u64;
    for code in 0..total {
        let mut x = code;
        let mut lit = 0u32;
        for _ in 0..c {
            lit |= 1 << (x % d as u64);
            x /= d as u64;
        }
        if lit.count_ones() == r {
            hits += 1;
        }
    }
    Ratio::new(hits, total)
}

/// Stirling numbers of the second kind by counting surjections.
pub fn stirling_by_surjections(c: u32, r: u32) -> u64 {
    if r == 0 {
        return u64::from(c == 0);
    }
    let total = (r as u64).pow(c);
    let surjective = (0..total)
        .filter(|&code| {
            let mut x = code;
            let mut lit = 0u32;
            for _ in 0..c {
                lit |= 1 << (x % r as u64);
                x /= r as u64;
            }
            lit.count_ones() == r
        })
        .count() as u64;
    surjective / (1..=r as u64).product::<u64>()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Multiply `p` by the linear form `sum_k coef_k x_{mode_k}`.
fn times_linear(p: &Poly, form: &[(usize, f64)]) -> Poly {
    let mut out = Poly::new();
    for (mono, &coef) in p {
        for &(mode, f) in form {
            if f == 0.0 {
                continue;
            }
            let mut m = *mono;
            m[mode] += 1;
            *out.entry(m).or_insert(0.0) += coef * f;
        }
    }
    out
}

/// Two-state amplitudes of the rotated, truncated source state.
///
/// The state is `sum_{n, m} (-1)^m tanh^n / cosh^2 |n-m, m, m, n-m>`; each term
/// is written as a monomial over `sqrt` of the factorials, the creation
/// operators are replaced by `[[c, s], [s, -c]]` images (half angles), and
/// coefficients are turned back into Fock amplitudes.
pub fn rotated_state(tau: f64, n_max: u32, phi: f64, theta: f64) -> HashMap<Monomial, f64> {
    let (ca, sa) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let (cb, sb) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let images: [Vec<(usize, f64)>; 4] = [
        vec![(0, ca), (1, sa)],
        vec![(0, sa), (1, -ca)],
        vec![(2, cb), (3, sb)],
        vec![(2, sb), (3, -cb)],
    ];
    let mut total = Poly::new();
    for n in 0..=n_max {
        for m in 0..=n {
            let occ = [n - m, m, m, n - m];
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let amp = sign * tau.tanh().powi(n as i32) / tau.cosh().powi(2);
            let norm: f64 = occ.iter().map(|&k| factorial(k).sqrt()).product();
            let mut p = Poly::from([([0; 4], amp / norm)]);
            for (mode, &k) in occ.iter().enumerate() {
                for _ in 0..k {
                    p = times_linear(&p, &images[mode]);
                }
            }
            for (mono, coef) in p {
                *total.entry(mono).or_insert(0.0) += coef;
            }
        }
    }
    total
        .into_iter()
        .map(|(mono, coef)| {
            let f: f64 = mono.iter().map(|&k| factorial(k).sqrt()).product();
            (mono, coef * f)
        })
        .collect()
}

/// Probability of every photon occupation of the rotated state.
pub fn occupation_probabilities(
    tau: f64,
    n_max: u32,
    phi: f64,
    theta: f64,
) -> HashMap<Monomial, f64> {
    rotated_state(tau, n_max, phi, theta)
        .into_iter()
        .map(|(m, a)| (m, a * a))
        .collect()
}

/// `table[c][r]`: chance that `c` photons produce `r` clicks when each photon is
/// independently lost (probability `1 - eta`) or sent to one of `d` detectors.
/// `d = None` resolves photon number exactly.
pub fn click_table(d: Option<u32>, eta: f64, c_max: u32) -> Vec<Vec<f64>> {
    let slots = d.map_or(2, |d| d + 1) as u64;
    (0..=c_max)
        .map(|c| {
            let mut row = vec![0.0; c_max as usize + 2];
            for code in 0..slots.pow(c) {
                let mut x = code;
                let mut prob = 1.0;
                let mut lit = 0u32;
                let mut detected = 0u32;
                for _ in 0..c {
                    let slot = x % slots;
                    x /= slots;
                    if slot == 0 {
                        prob *= 1.0 - eta;
                    } else {
                        prob *= match d {
                            Some(d) => eta / d as f64,
                            None => eta,
                        };
                        lit |= 1 << slot;
                        detected += 1;
                    }
                }
                let r = if d.is_some() {
                    lit.count_ones()
                } else {
                    detected
                };
                row[r as usize] += prob;
            }
            row
        })
        .collect()
}

/// Click-pattern probabilities of the rotated, truncated state.
pub fn brute_pattern_probabilities(
    tau: f64,
    n_max: u32,
    phi: f64,
    theta: f64,
    d: Option<u32>,
    eta_a: f64,
    eta_b: f64,
) -> HashMap<Monomial, f64> {
    let ta = click_table(d, eta_a, n_max);
    let tb = click_table(d, eta_b, n_max);
    let mut out: HashMap<Monomial, f64> = HashMap::new();
    for (c, p) in occupation_probabilities(tau, n_max, phi, theta) {
        let tables = [&ta, &ta, &tb, &tb];
        let rows: Vec<Vec<(u32, f64)>> = (0..4)
            .map(|k| {
                tables[k][c[k] as usize]
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(r, &w)| (r as u32, w))
                    .collect()
            })
            .collect();
        for &(r0, w0) in &rows[0] {
            for &(r1, w1) in &rows[1] {
                for &(r2, w2) in &rows[2] {
                    for &(r3, w3) in &rows[3] {
                        *out.entry([r0, r1, r2, r3]).or_insert(0.0) += p * w0 * w1 * w2 * w3;
                    }
                }
            }
        }
    }
    out
}

/// Two-mode transfer amplitude `<p', q'| U |p, q>` from the polynomial image of
/// `(a_h^dag)^p (a_v^dag)^q`.
pub fn rotation_amplitude_by_expansion(out: (u32, u32), inp: (u32, u32), angle: f64) -> f64 {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let mut p = Poly::from([([0; 4], 1.0 / (factorial(inp.0) * factorial(inp.1)).sqrt())]);
    for _ in 0..inp.0 {
        p = times_linear(&p, &[(0, c), (1, s)]);
    }
    for _ in 0..inp.1 {
        p = times_linear(&p, &[(0, s), (1, -c)]);
    }
    p.get(&[out.0, out.1, 0, 0]).copied().unwrap_or(0.0)
        * (factorial(out.0) * factorial(out.1)).sqrt()
}

/// Smallest `n` with `sum_{k > n} (k + 1) x^k (1 - x)^2 < eps`, `x = tanh^2 tau`.
pub fn truncation_for(tau: f64, eps: f64) -> u32 {
    let x = tau.tanh().powi(2);
    let mut mass = 0.0;
    for n in 0.. {
        mass += (n as f64 + 1.0) * x.powi(n) * (1.0 - x).powi(2);
        if 1.0 - mass < eps || n > 200 {
            return n as u32;
        }
    }
    unreachable!()
}

/// `z`-score of an observed count against a binomial expectation.
pub fn z_score(observed: u64, trials: u64, p: f64) -> f64 {
    let mean = trials as f64 * p;
    let sd = (trials as f64 * p * (1.0 - p)).sqrt();
    if sd == 0.0 {
        if observed as f64 == mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (observed as f64 - mean) / sd
    }
}

/// `z`-scores of observed bin counts against `trials` draws with the given
/// probabilities; bins expecting fewer than ten counts are pooled into one.
pub fn pooled_z_scores(bins: &[(u64, f64)], trials: u64) -> Vec<f64> {
    let mut z = Vec::new();
    let (mut pooled_obs, mut pooled_p) = (0u64, 0.0);
    for &(observed, p) in bins {
        if trials as f64 * p < 10.0 {
            pooled_obs += observed;
            pooled_p += p;
        } else {
            z.push(z_score(observed, trials, p));
        }
    }
    if pooled_obs > 0 || pooled_p > 0.0 {
        z.push(z_score(pooled_obs, trials, pooled_p.min(1.0)));
    }
    z
}
