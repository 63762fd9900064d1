//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test -p rbpmc --test acceptance`.
//!
//! The CPU-ratio check (8) is reported but not enforced; every other check
//! fails the run when it fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use rbpmc::config::Config;
use rbpmc::experiment::{
    run_sweep, write_outputs, SweepConfig, SweepOptions, SweepReport, TimingReport,
};
use rbpmc::math::{mean, sample_sd};
use rbpmc::modefinder::{find_modes, mode_count_stats, LogDensityGrid};
use rbpmc::pmc::{
    propose, resample_multinomial, responsibilities, run_pmc, update_alpha, update_alpha_raw,
    weights_double_rb, weights_single_rb, DoubleRbAlpha, InitialProposal, PmcConfig, ProposedCloud,
    Scheme,
};
use rbpmc::rng::{substream, StreamRng};
use rbpmc::target::{
    cell_centre, generate_artificial_sample, GaussianTarget, MeanMixturePosterior,
};
use rbpmc::{KernelMixture, MixtureHyper, ObservedSample, PriorSquare, Theta};

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    enforced: bool,
    detail: String,
}

fn line(o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    let note = if o.enforced {
        ""
    } else {
        " [reported, not enforced]"
    };
    println!("{tag} criterion {:>2} {}: {}{note}", o.id, o.name, o.detail);
}

// ---------------------------------------------------------------------------
// Independent linear-space oracles.

fn kernel_pdf(s: f64, from: &Theta, to: &Theta) -> f64 {
    (-from.dist2(to) / (2.0 * s * s)).exp() / (2.0 * PI * s * s)
}

fn normal_pdf(x: f64, m: f64, s: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
}

fn posterior_pdf(t: &Theta, data: &[f64], h: &MixtureHyper, prior: &PriorSquare) -> f64 {
    if !prior.contains(t) {
        return 0.0;
    }
    data.iter()
        .map(|&x| {
            h.p * normal_pdf(x, t.mu1, h.sigma1) + (1.0 - h.p) * normal_pdf(x, t.mu2, h.sigma2)
        })
        .product()
}

fn mix_pdf(scales: &[f64], alpha: &[f64], from: &Theta, to: &Theta) -> f64 {
    scales
        .iter()
        .zip(alpha)
        .map(|(&s, &a)| a * kernel_pdf(s, from, to))
        .sum()
}

fn normalise(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| rel_err(*x, *y))
        .fold(0.0, f64::max)
}

struct Case {
    data: Vec<f64>,
    hyper: MixtureHyper,
    prior: PriorSquare,
    scales: Vec<f64>,
    alpha: Vec<f64>,
    prev: Vec<Theta>,
    prev_w: Vec<f64>,
    proposed: ProposedCloud,
}

fn point(rng: &mut StreamRng, r: f64) -> Theta {
    Theta::new(rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_simplex(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    normalise(
        &(0..d)
            .map(|_| rng.random_range(0.05..1.0))
            .collect::<Vec<_>>(),
    )
}

fn random_case(rng: &mut StreamRng, max_n: usize, max_d: usize) -> Case {
    let n = rng.random_range(1..=max_n);
    let d = rng.random_range(1..=max_d);
    let data = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let hyper = MixtureHyper::new(
        rng.random_range(0.1..0.9),
        rng.random_range(0.7..2.0),
        rng.random_range(0.7..2.0),
    )
    .unwrap();
    let prev: Vec<Theta> = (0..n).map(|_| point(rng, 2.0)).collect();
    let particles: Vec<Theta> = (0..n).map(|_| point(rng, 2.0)).collect();
    Case {
        data,
        hyper,
        prior: PriorSquare::new(-5.0, 5.0).unwrap(),
        scales: (0..d).map(|_| rng.random_range(0.5..3.0)).collect(),
        alpha: random_simplex(rng, d),
        prev_w: random_simplex(rng, n),
        proposed: ProposedCloud {
            particles,
            components: (0..n).map(|_| rng.random_range(0..d)).collect(),
            ancestors: (0..n).map(|_| rng.random_range(0..n)).collect(),
            iteration: 1,
        },
        prev,
    }
}

impl Case {
    fn sample(&self) -> ObservedSample {
        ObservedSample::new(self.data.clone(), self.hyper).unwrap()
    }

    fn mix(&self) -> KernelMixture {
        KernelMixture::from_scales(&self.scales, self.alpha.clone()).unwrap()
    }

    fn pi(&self, t: &Theta) -> f64 {
        posterior_pdf(t, &self.data, &self.hyper, &self.prior)
    }

    fn oracle_single(&self) -> Vec<f64> {
        let p = &self.proposed;
        normalise(
            &(0..p.len())
                .map(|i| {
                    self.pi(&p.particles[i])
                        / mix_pdf(
                            &self.scales,
                            &self.alpha,
                            &self.prev[p.ancestors[i]],
                            &p.particles[i],
                        )
                })
                .collect::<Vec<_>>(),
        )
    }

    fn oracle_den(&self, x: &Theta) -> f64 {
        self.prev
            .iter()
            .zip(&self.prev_w)
            .map(|(a, w)| w * mix_pdf(&self.scales, &self.alpha, a, x))
            .sum()
    }

    fn oracle_double(&self) -> Vec<f64> {
        let p = &self.proposed;
        normalise(
            &p.particles
                .iter()
                .map(|x| self.pi(x) / self.oracle_den(x))
                .collect::<Vec<_>>(),
        )
    }

    fn oracle_resp(&self, from: &Theta, to: &Theta) -> Vec<f64> {
        normalise(
            &self
                .scales
                .iter()
                .zip(&self.alpha)
                .map(|(&s, &a)| a * kernel_pdf(s, from, to))
                .collect::<Vec<_>>(),
        )
    }

    fn oracle_alpha(&self, w: &[f64], scheme: Scheme) -> Vec<f64> {
        let d = self.scales.len();
        let p = &self.proposed;
        let mut out = vec![0.0; d];
        for i in 0..p.len() {
            match scheme {
                Scheme::Naive => out[p.components[i]] += w[i],
                Scheme::SingleRb => {
                    let r = self.oracle_resp(&self.prev[p.ancestors[i]], &p.particles[i]);
                    for k in 0..d {
                        out[k] += w[i] * r[k];
                    }
                }
                Scheme::DoubleRb => {
                    let den = self.oracle_den(&p.particles[i]);
                    for k in 0..d {
                        let num: f64 = self
                            .prev
                            .iter()
                            .zip(&self.prev_w)
                            .map(|(a, pw)| {
                                pw * self.alpha[k] * kernel_pdf(self.scales[k], a, &p.particles[i])
                            })
                            .sum();
                        out[k] += w[i] * num / den;
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(1, &[]);
    let mut worst = [0.0f64; 6];
    for _ in 0..1000 {
        let c = random_case(&mut rng, 5, 3);
        let sample = c.sample();
        let target = MeanMixturePosterior::new(&sample, c.prior).unwrap();
        let mix = c.mix();
        let single = weights_single_rb(&c.proposed, &c.prev, &mix, &target).unwrap();
        let double = weights_double_rb(&c.proposed, &c.prev, &c.prev_w, &mix, &target).unwrap();
        let ws = c.oracle_single();
        let wd = c.oracle_double();
        worst[0] = worst[0].max(max_rel(&single.norm_weights, &ws));
        worst[1] = worst[1].max(max_rel(&double.norm_weights, &wd));
        for i in 0..c.proposed.len() {
            let from = &c.prev[c.proposed.ancestors[i]];
            let to = &c.proposed.particles[i];
            worst[2] = worst[2].max(max_rel(
                &responsibilities(&mix, from, to),
                &c.oracle_resp(from, to),
            ));
        }
        for (k, (scheme, cloud, w)) in [
            (Scheme::Naive, &single, &ws),
            (Scheme::SingleRb, &single, &ws),
            (Scheme::DoubleRb, &double, &wd),
        ]
        .into_iter()
        .enumerate()
        {
            let got = update_alpha_raw(
                cloud,
                &c.prev,
                &c.prev_w,
                &mix,
                scheme,
                DoubleRbAlpha::Marginalized,
            )
            .unwrap();
            let want = c.oracle_alpha(w, scheme);
            // Naive entries can be exactly zero; compare those absolutely.
            let err = got
                .iter()
                .zip(&want)
                .map(|(a, b)| if *b == 0.0 { a.abs() } else { rel_err(*a, *b) })
                .fold(0.0, f64::max);
            worst[3 + k] = worst[3 + k].max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    Outcome {
        id: 1,
        name: "oracle equivalence",
        pass: max <= 1e-12 && secs < 60.0,
        enforced: true,
        detail: format!(
            "1000 configs; max rel err single {:.1e}, double {:.1e}, resp {:.1e}, alpha naive/single/double {:.1e}/{:.1e}/{:.1e}; {secs:.1}s",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = substream(2, &[]);
    let mut worst_const = 0.0f64;
    for _ in 0..200 {
        let mut c = random_case(&mut rng, 8, 3);
        let centre = point(&mut rng, 2.0);
        c.prev.iter_mut().for_each(|p| *p = centre);
        let sample = c.sample();
        let target = MeanMixturePosterior::new(&sample, c.prior).unwrap();
        let mix = c.mix();
        let s = weights_single_rb(&c.proposed, &c.prev, &mix, &target).unwrap();
        let d = weights_double_rb(&c.proposed, &c.prev, &c.prev_w, &mix, &target).unwrap();
        worst_const = worst_const.max(max_rel(&d.norm_weights, &s.norm_weights));
    }
    let mut dup_exact = 0;
    let mut single_unequal = 0;
    for _ in 0..200 {
        let mut c = random_case(&mut rng, 8, 3);
        while c.prev.len() < 3 {
            c = random_case(&mut rng, 8, 3);
        }
        let n = c.prev.len();
        c.prev[0] = Theta::new(-1.5, -1.5);
        c.prev[1] = Theta::new(1.5, 1.5);
        c.proposed.particles[1] = c.proposed.particles[0];
        c.proposed.ancestors[0] = 0;
        c.proposed.ancestors[1] = 1;
        c.proposed.particles[n - 1] = c.proposed.particles[0];
        let sample = c.sample();
        let target = MeanMixturePosterior::new(&sample, c.prior).unwrap();
        let mix = c.mix();
        let d = weights_double_rb(&c.proposed, &c.prev, &c.prev_w, &mix, &target).unwrap();
        let w = &d.norm_weights;
        if w[0] == w[1] && w[0] == w[n - 1] {
            dup_exact += 1;
        }
        let s = weights_single_rb(&c.proposed, &c.prev, &mix, &target).unwrap();
        if s.norm_weights[0] != s.norm_weights[1] {
            single_unequal += 1;
        }
    }
    Outcome {
        id: 2,
        name: "degeneracy equivalence",
        pass: worst_const <= 1e-12 && dup_exact == 200 && single_unequal >= 1,
        enforced: true,
        detail: format!(
            "constant clouds max rel diff {worst_const:.1e}; duplicates equal under double {dup_exact}/200; single-RB counterexamples {single_unequal}/200"
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = substream(3, &[]);
    let mut steps = 0;
    let mut worst_w = 0.0f64;
    let mut worst_a = 0.0f64;
    let mut floor_ok = true;
    let data = generate_artificial_sample(40, 2.5, &mut rng).unwrap();
    let prior = PriorSquare::around_data(&data, 2.0).unwrap();
    let sample = ObservedSample::new(data, MixtureHyper::new(0.3, 1.0, 1.5).unwrap()).unwrap();
    let target = MeanMixturePosterior::new(&sample, prior).unwrap();
    while steps < 10_000 {
        let scheme = Scheme::ALL[rng.random_range(0..3)];
        let rule = if rng.random_bool(0.5) {
            DoubleRbAlpha::Marginalized
        } else {
            DoubleRbAlpha::Conditional
        };
        let n = rng.random_range(2..=40);
        let d = rng.random_range(1..=5);
        let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..5.0)).collect();
        let mut mix = KernelMixture::uniform(&scales).unwrap();
        let floor = 1e-3 / d as f64;
        let mut prev: Vec<Theta> = (0..n)
            .map(|_| {
                Theta::new(
                    rng.random_range(prior.lo..prior.hi),
                    rng.random_range(prior.lo..prior.hi),
                )
            })
            .collect();
        let mut prev_w = vec![1.0 / n as f64; n];
        for t in 1..=20 {
            let proposed = propose(&prev, &prev_w, &mix, scheme, t, &mut rng).unwrap();
            let cloud = match scheme {
                Scheme::DoubleRb => weights_double_rb(&proposed, &prev, &prev_w, &mix, &target),
                _ => weights_single_rb(&proposed, &prev, &mix, &target),
            };
            let Ok(cloud) = cloud else { break };
            worst_w = worst_w.max((cloud.norm_weights.iter().sum::<f64>() - 1.0).abs());
            let alpha = update_alpha(&cloud, &prev, &prev_w, &mix, scheme, rule, 1e-3).unwrap();
            worst_a = worst_a.max((alpha.iter().sum::<f64>() - 1.0).abs());
            floor_ok &= alpha.iter().all(|a| *a >= floor * (1.0 - 1e-12));
            mix = mix.with_alpha(alpha).unwrap();
            steps += 1;
            if scheme == Scheme::DoubleRb {
                prev = cloud.particles.clone();
                prev_w = cloud.norm_weights.clone();
            } else {
                prev = resample_multinomial(&cloud, &mut rng).particles;
            }
        }
    }
    Outcome {
        id: 3,
        name: "simplex/normalization",
        pass: worst_w <= 1e-10 && worst_a <= 1e-12 && floor_ok,
        enforced: true,
        detail: format!("{steps} steps; max |sum w - 1| {worst_w:.1e}; max |sum alpha - 1| {worst_a:.1e}; floor respected {floor_ok}"),
    }
}

/// Positive mode of `ln(φ(x + a) + φ(x − a))` by bisection on the derivative.
fn two_bump_mode(a: f64, s: f64) -> f64 {
    let deriv = |x: f64| {
        let w1 = (-(x - a).powi(2) / (2.0 * s * s)).exp();
        let w2 = (-(x + a).powi(2) / (2.0 * s * s)).exp();
        -(x - a) * w1 - (x + a) * w2
    };
    let (mut lo, mut hi) = (a * 0.5, a * 1.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let res = 200;
    let prior = PriorSquare::new(-8.0, 8.0).unwrap();
    let h = prior.width() / res as f64;
    let (a, s) = (3.0, 1.0);
    let two = LogDensityGrid::from_fn(res, |i, j| {
        let x = cell_centre(&prior, res, i);
        let y = cell_centre(&prior, res, j);
        let r = (-(y * y) / (2.0 * s * s)).exp();
        (r * ((-(x - a).powi(2) / 2.0).exp() + (-(x + a).powi(2) / 2.0).exp())).ln()
    })
    .unwrap();
    let c2 = find_modes(&two, &prior, 1.0).unwrap();
    let m = two_bump_mode(a, s);
    let truth = [Theta::new(-m, 0.0), Theta::new(m, 0.0)];
    let two_ok = c2.len() == 2
        && truth.iter().all(|t| {
            c2.modes.iter().any(|md| {
                (md.location.mu1 - t.mu1).abs() <= h && (md.location.mu2 - t.mu2).abs() <= h
            })
        });
    let centre = Theta::new(1.3, -0.7);
    let one = LogDensityGrid::from_fn(res, |i, j| {
        -Theta::new(cell_centre(&prior, res, i), cell_centre(&prior, res, j)).dist2(&centre) / 2.0
    })
    .unwrap();
    let c1 = find_modes(&one, &prior, 1.0).unwrap();
    let one_ok = c1.len() == 1
        && (c1.modes[0].location.mu1 - centre.mu1).abs() <= h
        && (c1.modes[0].location.mu2 - centre.mu2).abs() <= h;
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 4,
        name: "mode-census sanity",
        pass: two_ok && one_ok && secs < 5.0,
        enforced: true,
        detail: format!(
            "two Gaussians: {} modes (analytic +-{m:.4}); one Gaussian: {} mode; {secs:.2}s",
            c2.len(),
            c1.len()
        ),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let ns = [20usize, 30, 40, 50, 100, 500, 1000];
    let ps = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let stats = |mu2: f64| {
        let samples: Vec<ObservedSample> = (0..100u64)
            .map(|k| {
                let n = ns[(k % 7) as usize];
                let p = ps[((k / 7) % 6) as usize];
                let data =
                    generate_artificial_sample(n, mu2, &mut substream(5, &[k, mu2.to_bits()]))
                        .unwrap();
                ObservedSample::new(data, MixtureHyper::new(p, 1.0, 1.0).unwrap()).unwrap()
            })
            .collect();
        mode_count_stats(&samples, None, 200, 1.0, 2.0).unwrap()
    };
    let lo = stats(1.0);
    let hi = stats(5.0);
    let secs = start.elapsed().as_secs_f64();
    let pass = (lo.mean - 2.053).abs() <= 0.5
        && (hi.mean - 3.742).abs() <= 0.6
        && hi.mean > lo.mean
        && secs < 600.0;
    Outcome {
        id: 5,
        name: "mode-count trend",
        pass,
        enforced: true,
        detail: format!(
            "mu2=1: {:.3} ({:.3}) vs 2.053; mu2=5: {:.3} ({:.3}) vs 3.742; {secs:.0}s",
            lo.mean, lo.sd, hi.mean, hi.sd
        ),
    }
}

fn reduced_sweep() -> (SweepReport, f64) {
    let mut c = SweepConfig::from(&Config::default());
    c.axes.mu2_values = vec![2.0, 3.0, 4.0];
    c.axes.sigma2_values = vec![1.0, 3.0];
    c.axes.n_values = vec![50, 100];
    c.axes.p_values = vec![0.3, 0.5];
    c.axes.replicates = 30;
    c.pmc.particles = 1000;
    c.pmc.iterations = 10;
    let start = Instant::now();
    let out = run_sweep(
        &c,
        &SweepOptions {
            workers: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    (out.report, start.elapsed().as_secs_f64())
}

/// One-sided paired t-test of `mean(d) > 0`; returns (mean, t, p-value).
fn paired_test(d: &[f64]) -> (f64, f64, f64) {
    let m = mean(d);
    let se = sample_sd(d) / (d.len() as f64).sqrt();
    let t = m / se;
    let p = 1.0
        - StudentsT::new(0.0, 1.0, (d.len() - 1) as f64)
            .unwrap()
            .cdf(t);
    (m, t, p)
}

fn criterion_6(report: &SweepReport, secs: f64) -> Outcome {
    let early = paired_test(&report.paired_differences(Scheme::DoubleRb, Scheme::SingleRb, false));
    let late = paired_test(&report.paired_differences(Scheme::DoubleRb, Scheme::SingleRb, true));
    let pass = early.0 > 0.0 && late.0 > 0.0 && early.2 < 0.05 && late.2 < 0.05;
    Outcome {
        id: 6,
        name: "detection superiority",
        pass,
        enforced: true,
        detail: format!(
            "double - single at t=5: {:+.4} (t={:.2}, p={:.1e}); at t=10: {:+.4} (t={:.2}, p={:.1e}); sweep {secs:.0}s",
            early.0, early.1, early.2, late.0, late.1, late.2
        ),
    }
}

fn criterion_7(report: &SweepReport) -> Outcome {
    let drop = |s: Scheme| {
        let d: Vec<f64> = report
            .cells
            .iter()
            .flat_map(|c| &c.records)
            .filter_map(|r| r.outcome(s))
            .filter_map(|o| Some(o.early? - o.late?))
            .collect();
        mean(&d)
    };
    let (ds, dd) = (drop(Scheme::SingleRb), drop(Scheme::DoubleRb));
    Outcome {
        id: 7,
        name: "mode-loss asymmetry",
        pass: ds > dd,
        enforced: true,
        detail: format!("mean drop t=5 -> t=10: single {ds:.4}, double {dd:.4}"),
    }
}

fn criterion_8() -> Outcome {
    let mut c = SweepConfig::from(&Config::default());
    c.axes.n_values = vec![20, 100, 1000];
    c.axes.p_values = vec![0.3];
    c.axes.mu2_values = vec![3.0];
    c.axes.sigma2_values = vec![1.0];
    c.axes.replicates = 3;
    let out = run_sweep(
        &c,
        &SweepOptions {
            workers: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    let rows = TimingReport::cpu_by_n(&out.report.cells, &c.pmc.schemes);
    let ratios: Vec<f64> = rows.iter().map(|(_, s)| s[1].mean / s[0].mean).collect();
    let in_band = ratios.iter().all(|r| (2.0..=8.0).contains(r));
    let monotone = ratios.windows(2).all(|w| w[1] <= w[0]);
    let parts: Vec<String> = rows
        .iter()
        .zip(&ratios)
        .map(|((n, s), r)| format!("n={n}: {:.3}s/{:.3}s ratio {r:.2}", s[0].mean, s[1].mean))
        .collect();
    Outcome {
        id: 8,
        name: "CPU overhead",
        pass: in_band && monotone,
        enforced: false,
        detail: format!(
            "{}; within [2,8] {in_band}; non-increasing {monotone}",
            parts.join("; ")
        ),
    }
}

fn criterion_9() -> Outcome {
    let truth = Theta::new(1.5, -2.0);
    let target = GaussianTarget {
        mean: truth,
        sd: 0.8,
    };
    let init = InitialProposal::gaussian_over(&PriorSquare::new(-10.0, 10.0).unwrap());
    let mix = KernelMixture::uniform(&rbpmc::kernel::DEFAULT_SCALES).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for scheme in [Scheme::SingleRb, Scheme::DoubleRb] {
        let mut est = Vec::new();
        let mut outside = 0;
        for seed in 0..50u64 {
            let run = run_pmc(
                &target,
                &init,
                &mix,
                &PmcConfig::new(scheme, 500, 10),
                &mut substream(900 + seed, &[]),
            )
            .unwrap();
            let cloud = &run.final_cloud;
            let m = cloud.weighted_mean();
            // Delta-method standard error of a self-normalised estimate.
            let se = |f: fn(&Theta) -> f64, mf: f64| {
                cloud
                    .particles
                    .iter()
                    .zip(&cloud.norm_weights)
                    .map(|(t, w)| w * w * (f(t) - mf).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let (se1, se2) = (se(|t| t.mu1, m.mu1), se(|t| t.mu2, m.mu2));
            if (m.mu1 - truth.mu1).abs() > 3.0 * se1 || (m.mu2 - truth.mu2).abs() > 3.0 * se2 {
                outside += 1;
            }
            est.push(m);
        }
        let pooled = |f: fn(&Theta) -> f64, t: f64| {
            let xs: Vec<f64> = est.iter().map(f).collect();
            ((mean(&xs) - t) / (sample_sd(&xs) / (xs.len() as f64).sqrt())).abs()
        };
        let (z1, z2) = (pooled(|t| t.mu1, truth.mu1), pooled(|t| t.mu2, truth.mu2));
        // Per-seed 3-SE excursions: about 0.3% each, so more than 2 of 50 is implausible.
        let ok = z1 <= 3.0 && z2 <= 3.0 && outside <= 2;
        pass &= ok;
        parts.push(format!(
            "{scheme}: pooled |z| {z1:.2}/{z2:.2}, seeds outside 3 SE {outside}/50"
        ));
    }
    Outcome {
        id: 9,
        name: "IS correctness",
        pass,
        enforced: true,
        detail: parts.join("; "),
    }
}

fn criterion_10() -> Outcome {
    let mut c = SweepConfig::from(&Config::default());
    c.seed = 10;
    c.axes.n_values = vec![20, 100];
    c.axes.p_values = vec![0.2, 0.5];
    c.axes.mu2_values = vec![2.0];
    c.axes.sigma2_values = vec![1.0];
    c.axes.replicates = 3;
    c.pmc.particles = 200;
    c.modes.resolution = 80;
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<Vec<u8>> = [1usize, 8]
        .iter()
        .map(|&w| {
            let out = run_sweep(
                &c,
                &SweepOptions {
                    workers: Some(w),
                    ..Default::default()
                },
            )
            .unwrap();
            let paths = write_outputs(&out, &dir.path().join(format!("w{w}"))).unwrap();
            std::fs::read(paths.report).unwrap()
        })
        .collect();
    let same = bytes[0] == bytes[1];
    Outcome {
        id: 10,
        name: "determinism",
        pass: same,
        enforced: true,
        detail: format!(
            "report.json {} bytes at 1 and 8 workers, identical {same}",
            bytes[0].len()
        ),
    }
}

fn main() {
    // Only the acceptance binary is invoked with test-harness flags; honour `--list`.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        line(&o);
        outcomes.push(o);
    };
    run(criterion_1());
    run(criterion_2());
    run(criterion_3());
    run(criterion_4());
    run(criterion_5());
    let (report, secs) = reduced_sweep();
    run(criterion_6(&report, secs));
    run(criterion_7(&report));
    run(criterion_8());
    run(criterion_9());
    run(criterion_10());
    let failed: Vec<u32> = outcomes
        .iter()
        .filter(|o| o.enforced && !o.pass)
        .map(|o| o.id)
        .collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} passed", outcomes.len());
    if !failed.is_empty() {
        eprintln!("enforced criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
