//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rlfd_core::dmp::{differentiate_demo, fit_from_demo, rollout, DmpGains, DmpParams, NoInjection, Trajectory};
use rlfd_core::learn::{
    critic_loss_and_grad, dense_reward, gaussian_log_prob_grad, sparse_reward, squashed_log_prob,
    surrogate_loss_and_grad, value_loss_and_grad, Activation, Mlp, SurrogateSample, TanhGaussianPolicy, DENSE_ALPHA,
    DENSE_BETA, DENSE_EPSILON,
};
use rlfd_core::orientation::{
    angle_axis_to_quat, apply_orientation_residual, fit_orientation_dmp, orientation_rollout, quat_compose, quat_exp,
    quat_log, AngleAxisResidual, OrientationDmpParams, UnitQuaternion,
};
use rlfd_core::{Quat, Vector3};
use rlfd_harness::experiments::{emit_outputs, run_family, ExperimentSpec, Family, ResultTable, Session};
use rlfd_harness::spiral::{fit_spiral, max_step_jerk, spiral_demo, spiral_variant, spiral_variants, SpiralSpec};
use rlfd_harness::train::episodes_to_reach;

type M3 = [[f64; 3]; 3];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rodrigues(k: [f64; 3], angle: f64) -> M3 {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = k;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn transpose(a: &M3) -> M3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[j][i];
        }
    }
    m
}

fn max_diff(a: &M3, b: &M3) -> f64 {
    (0..9).map(|k| (a[k / 3][k % 3] - b[k / 3][k % 3]).abs()).fold(0.0, f64::max)
}

fn random_axis(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-2 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn quat(k: [f64; 3], a: f64) -> Quat {
    UnitQuaternion::from_axis_angle(Vector3::new(k[0], k[1], k[2]), a)
}

fn quaternion_math() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 1000;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (ka, aa) = (random_axis(&mut rng), rng.gen_range(0.0..PI));
        let (kb, ab) = (random_axis(&mut rng), rng.gen_range(0.0..PI));
        let (a, b) = (quat(ka, aa), quat(kb, ab));

        let c = a.canonical();
        let back = quat_exp(&quat_log(&c));
        worst = worst.max(back.to_array().iter().zip(c.to_array()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));

        let ab_q = quat_compose(&a, &b).unwrap();
        let att = mul(&transpose(&rodrigues(ka, aa)), &transpose(&rodrigues(kb, ab)));
        worst = worst.max(max_diff(&ab_q.attitude_matrix(), &att));

        let alpha = rng.gen_range(-PI..PI);
        let scale = rng.gen_range(0.1..5.0);
        let res = AngleAxisResidual {
            alpha,
            r: Vector3::new(ka[0] * scale, ka[1] * scale, ka[2] * scale),
        };
        let dq = angle_axis_to_quat(&res).unwrap();
        worst = worst.max(max_diff(&dq.rotation_matrix(), &rodrigues(ka, alpha)));

        let qf = apply_orientation_residual(&b, &res).unwrap();
        let att = mul(&transpose(&rodrigues(ka, alpha)), &transpose(&rodrigues(kb, ab)));
        worst = worst.max(max_diff(&qf.attitude_matrix(), &att));
    }
    verdict(worst < 1e-9, format!("{cases} cases, worst error {worst:.2e}"))
}

fn min_jerk_demo(from: [f64; 3], to: [f64; 3], duration: f64, dt: f64) -> Trajectory<f64> {
    let n = (duration / dt).round() as usize;
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            let u = i as f64 / n as f64;
            let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
            (0..3).map(|k| from[k] + (to[k] - from[k]) * p).collect()
        })
        .collect();
    differentiate_demo(&rows, dt).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn rmse(a: &Trajectory<f64>, b: &Trajectory<f64>) -> f64 {
    let n = a.len().min(b.len());
    ((0..n).map(|i| dist(&a.positions[i], &b.positions[i]).powi(2)).sum::<f64>() / n as f64).sqrt()
}

fn dmp_fidelity() -> Verdict {
    let dt = 1e-3;
    let gains = DmpGains::default();
    let mj = min_jerk_demo([0.1, -0.05, 0.3], [0.0, 0.0, 0.02], 1.0, dt);
    let p = fit_from_demo(&mj, 40, gains).unwrap();
    let out = rollout(&p, &p.y0, &p.goal, mj.duration(), dt, 1, &mut NoInjection).unwrap();
    let mj_rel = rmse(&mj, &out) / mj.spatial_extent();

    let spec = SpiralSpec::default();
    let sp = spiral_demo(&spec);
    let params = fit_spiral(&spec).unwrap();
    let replay = rollout(&params, &params.y0, &params.goal, sp.duration(), spec.dt, 1, &mut NoInjection).unwrap();
    let sp_rel = rmse(&sp, &replay) / sp.spatial_extent();

    let demo: Vec<Quat> = (0..1001)
        .map(|i| {
            let u = i as f64 / 1000.0;
            let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
            quat([0.0, 0.0, 1.0], PI / 2.0 * p)
        })
        .collect();
    let op = fit_orientation_dmp(&demo, dt, 70, gains).unwrap();
    let oq = orientation_rollout(&op, demo[0], Vector3::zeros(), 1.0, dt).unwrap();
    let geo = (demo.iter().zip(&oq).map(|(a, b)| a.geodesic_distance(b).powi(2)).sum::<f64>() / demo.len() as f64).sqrt();

    let (y0, g) = (vec![0.2, -0.1, 0.4], vec![-0.05, 0.1, 0.0]);
    let free = DmpParams::unforced(y0.clone(), g.clone(), 1.0, 40, gains).unwrap();
    let t = rollout(&free, &y0, &g, 2.0, dt, 1, &mut NoInjection).unwrap();
    let conv = dist(t.positions.last().unwrap(), &g) / dist(&y0, &g);

    let qg = quat([0.0, 1.0, 0.0], 1.0);
    let ofree = OrientationDmpParams::unforced(UnitQuaternion::identity(), qg, 1.0, 70, gains).unwrap();
    let ot = orientation_rollout(&ofree, UnitQuaternion::identity(), Vector3::zeros(), 2.0, dt).unwrap();
    let oconv = ot.last().unwrap().geodesic_distance(&qg);

    verdict(
        mj_rel <= 0.01 && sp_rel <= 0.01 && geo <= 0.02 && conv <= 1e-2 && oconv <= 1e-2,
        format!(
            "min-jerk {:.3}%, spiral {:.3}% of extent, orientation {geo:.4} rad, goal residual {conv:.1e} of distance, orientation goal residual {:.1e} rad of 1 rad",
            100.0 * mj_rel,
            100.0 * sp_rel,
            oconv
        ),
    )
}

fn exploration_contrast() -> Verdict {
    let spec = SpiralSpec::default();
    let mut ok = true;
    let mut worst = (f64::INFINITY, 0.0f64);
    for seed in 0..10 {
        let v = spiral_variants(&spec, seed).unwrap();
        let j: Vec<f64> = v.iter().map(|(_, _, t)| max_step_jerk(t)).collect();
        ok &= j[3] > j[1] && j[3] > j[2] && j[1] <= 1.5 * j[0] && j[2] <= 1.5 * j[0];
        worst.0 = worst.0.min(j[3] / j[1].max(j[2]));
        worst.1 = worst.1.max(j[1].max(j[2]) / j[0]);
    }
    let params = fit_spiral(&spec).unwrap();
    let again = spiral_variants(&spec, 0).unwrap();
    let det = again[3].2 == spiral_variant(&params, &spec, again[3].1, 0).unwrap();
    verdict(
        ok && det,
        format!(
            "10 seeds: task/other jerk >= {:.1}x, coupling and parameter <= {:.3}x unperturbed, deterministic {det}",
            worst.0, worst.1
        ),
    )
}

fn reward_formulas() -> Verdict {
    let kappa = 0.002;
    let boundary = sparse_reward(kappa, kappa) == 1.0
        && sparse_reward(kappa * (1.0 + 1e-12), kappa) == 0.0
        && sparse_reward(0.0, kappa) == 1.0;
    let r = dense_reward(0.1, 0.05, DENSE_ALPHA, DENSE_BETA, DENSE_EPSILON).unwrap();
    let constants = DENSE_ALPHA == 10.0 && DENSE_BETA == 0.002 && DENSE_EPSILON == 0.0001;
    verdict(
        boundary && constants && (r + 1.0400802).abs() < 1e-6,
        format!("sparse boundary {boundary}, dense(0.1, 0.05) = {r:.7}"),
    )
}

const H: f64 = 1e-6;

fn numeric_grad(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = f(&p);
            p[i] = orig - H;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = dist(a, b);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn randomized(mut net: Mlp, rng: &mut ChaCha8Rng, scale: f64) -> Mlp {
    for p in &mut net.params {
        *p = rng.gen_range(-scale..scale);
    }
    net
}

fn with_params(net: &Mlp, params: &[f64]) -> Mlp {
    Mlp {
        params: params.to_vec(),
        ..net.clone()
    }
}

fn obs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn gradient_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 4];
    let cases = 200;
    for _ in 0..cases {
        let mut policy = TanhGaussianPolicy::new(2, &[3], 1, Activation::Tanh, -0.5, &mut rng);
        policy.net = randomized(policy.net, &mut rng, 0.8);
        let clip = 0.2;
        let mut samples = Vec::new();
        while samples.len() < 6 {
            let o = obs(&mut rng, 2);
            let s = policy.sample(&o, &mut rng);
            let shift: f64 = rng.gen_range(-0.4..0.4);
            let ratio = (-shift).exp();
            if (ratio - 1.0 - clip).abs() < 1e-3 || (ratio - 1.0 + clip).abs() < 1e-3 {
                continue;
            }
            samples.push(SurrogateSample {
                obs: o,
                u: s.u,
                old_log_prob: s.log_prob + shift,
                advantage: rng.gen_range(-2.0..2.0),
            });
        }
        let (_, g) = surrogate_loss_and_grad(&policy, &samples, clip);
        let fd = numeric_grad(&policy.net.params, |p| {
            let pol = TanhGaussianPolicy {
                net: with_params(&policy.net, p),
                action_dim: 1,
            };
            surrogate_loss_and_grad(&pol, &samples, clip).0
        });
        worst[0] = worst[0].max(relative_error(&g, &fd));

        let v = randomized(Mlp::new(&[2, 4, 1], Activation::Tanh, &mut rng), &mut rng, 1.0);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| obs(&mut rng, 2)).collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, g) = value_loss_and_grad(&v, &xs, &ys);
        let fd = numeric_grad(&v.params, |p| value_loss_and_grad(&with_params(&v, p), &xs, &ys).0);
        worst[1] = worst[1].max(relative_error(&g, &fd));

        let q = randomized(Mlp::new(&[3, 4, 1], Activation::Relu, &mut rng), &mut rng, 1.0);
        let xs: Vec<Vec<f64>> = (0..5).map(|_| obs(&mut rng, 3)).collect();
        let (_, g) = critic_loss_and_grad(&q, &xs, &ys);
        let fd = numeric_grad(&q.params, |p| critic_loss_and_grad(&with_params(&q, p), &xs, &ys).0);
        worst[2] = worst[2].max(relative_error(&g, &fd));

        let o = obs(&mut rng, 2);
        let u = policy.sample(&o, &mut rng).u;
        let acts = policy.net.forward_cached(&o);
        let head = policy.head_from_output(acts.last().unwrap());
        let (dm, ds) = gaussian_log_prob_grad(&u, &head);
        let dout: Vec<f64> = dm.iter().chain(&ds).copied().collect();
        let mut g = vec![0.0; policy.net.n_params()];
        policy.net.backward(&acts, &dout, &mut g);
        let fd = numeric_grad(&policy.net.params, |p| {
            let pol = TanhGaussianPolicy {
                net: with_params(&policy.net, p),
                action_dim: 1,
            };
            let h = pol.head(&o);
            squashed_log_prob(&u, &h.mean, &h.log_std)
        });
        worst[3] = worst[3].max(relative_error(&g, &fd));
    }
    verdict(
        worst.iter().all(|w| *w < 1e-4),
        format!(
            "{cases} cases, worst relative error: surrogate {:.1e}, value {:.1e}, critic {:.1e}, log-prob {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn success(t: &ResultTable, cond: &str, task: &str) -> f64 {
    t.row(cond, task).map_or(f64::NAN, |r| r.success)
}

fn locus_ordering(t: &ResultTable, took: Duration) -> Verdict {
    let avg = |c: &str| success(t, c, "average");
    let (none, coupling, param, task) = (avg("None"), avg("CouplingTerm"), avg("ParameterSpace"), avg("TaskSpace"));
    let reach = t.row("TaskSpace", "easy").and_then(|r| r.episodes_to_reach);
    let pass = task > param && param > none && task >= coupling + 20.0 && reach.is_some_and(|e| e <= 1000.0) && took.as_secs() <= 1800;
    verdict(
        pass,
        format!(
            "average success None {none:.1}, Coupling {coupling:.1}, Parameter {param:.1}, Task {task:.1}; task-space reaches 60% at {} episodes; {:.0} s",
            reach.map_or("never".into(), |e| format!("{e:.0}")),
            took.as_secs_f64()
        ),
    )
}

fn strategy_ordering(t: &ResultTable, took: Duration) -> Verdict {
    let avg = |c: &str| success(t, c, "average");
    let (random, linear, sac, ppo) = (avg("Random"), avg("Linear"), avg("SAC"), avg("PPO"));
    let best = sac.max(ppo);
    let pass = best >= linear + 20.0 && best >= random + 20.0 && took.as_secs() <= 1800;
    verdict(
        pass,
        format!(
            "average success Random {random:.1}, Linear {linear:.1}, SAC {sac:.1}, PPO {ppo:.1}; {:.0} s",
            took.as_secs_f64()
        ),
    )
}

fn gentleness(t: &ResultTable) -> Verdict {
    let (r, p) = (t.row("rLfD", "average").unwrap(), t.row("PureRL", "average").unwrap());
    let matched = p.success >= r.success - 5.0;
    let gentler = r.peak_force <= p.peak_force;
    // Episodes for each learner's training curve to first reach rLfD's easy
    // success, capped by what rLfD itself attains during training.
    let easy = success(t, "rLfD", "easy") / 100.0;
    let mut ratios = Vec::new();
    for (rr, pr) in t.runs_of("rLfD").zip(t.runs_of("PureRL")) {
        let window = 100;
        let best = (window..=rr.curve.len())
            .map(|i| rr.curve[i - window..i].iter().map(|c| c.success as f64).sum::<f64>() / window as f64)
            .fold(0.0, f64::max);
        let target = easy.min(best);
        let re = episodes_to_reach(&rr.curve, target, window).unwrap_or(rr.curve.len()) as f64;
        let pe = episodes_to_reach(&pr.curve, target, window).map_or(f64::INFINITY, |e| e as f64);
        ratios.push(pe / re);
    }
    let budget = ratios.iter().all(|x| *x >= 3.0);
    verdict(
        matched && gentler && budget,
        format!(
            "rLfD success {:.1}, peak {:.2} N; pure RL success {:.1}, peak {:.2} N; pure-RL/rLfD episodes to rLfD success {:?}",
            r.success,
            r.peak_force,
            p.success,
            p.peak_force,
            ratios.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>()
        ),
    )
}

fn fullpose_necessity(t: &ResultTable) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for task in ["gear", "rj45", "peg"] {
        let (tr, fp) = (success(t, "PPO/None", task), success(t, "PPO/PPO", task));
        pass &= if task == "peg" { (tr - fp).abs() <= 10.0 } else { fp >= tr + 20.0 };
        parts.push(format!("{task} translation-only {tr:.1} vs full-pose {fp:.1}"));
    }
    verdict(pass, parts.join("; "))
}

fn transfer(t: &ResultTable, took: Duration) -> Verdict {
    let full = t.rows.iter().find(|r| r.condition == "target").map_or(f64::NAN, |r| r.success);
    let tuned = t.rows.iter().find(|r| r.condition.starts_with("source->target (3")).map_or(f64::NAN, |r| r.success);
    let scratch = t.rows.iter().find(|r| r.condition.starts_with("scratch")).map_or(f64::NAN, |r| r.success);
    let updates_ok = t.runs.iter().filter(|r| r.condition.starts_with("source->target (3")).all(|r| r.updates == 3);
    let pass = updates_ok && tuned >= 0.9 * full && scratch <= 0.8 * full && took.as_secs() <= 900;
    verdict(
        pass,
        format!(
            "full target {full:.1}, fine-tuned {tuned:.1} ({:.0}%), scratch {scratch:.1} ({:.0}%); {:.0} s",
            100.0 * tuned / full,
            100.0 * scratch / full,
            took.as_secs_f64()
        ),
    )
}

fn emitted(table: &ResultTable, dir: &Path) -> Vec<(String, Vec<u8>)> {
    emit_outputs(std::slice::from_ref(table), dir)
        .unwrap()
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism(first: &ResultTable, spec: &ExperimentSpec) -> Verdict {
    let again = run_family(&Session::new(None).unwrap(), Family::Transfer, spec).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (emitted(first, a.path()), emitted(&again, b.path()));
    let same = !fa.is_empty() && fa == fb;
    verdict(same, format!("transfer rerun in a fresh session, {} CSV files byte-identical: {same}", fa.len()))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn main() -> ExitCode {
    let mut verdicts: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut report = |n: usize, name: &'static str, v: Verdict, took: Duration| {
        println!("{} {n:>2} {name}: {} [{:.1} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail, took.as_secs_f64());
        verdicts.push((n, name, v));
    };

    let (v, d) = timed(quaternion_math);
    let v = Verdict { pass: v.pass && d.as_secs_f64() < 5.0, ..v };
    report(1, "quaternion math", v, d);
    let (v, d) = timed(dmp_fidelity);
    let v = Verdict { pass: v.pass && d.as_secs_f64() < 30.0, ..v };
    report(2, "primitive fidelity", v, d);
    let (v, d) = timed(exploration_contrast);
    let v = Verdict { pass: v.pass && d.as_secs_f64() < 10.0, ..v };
    report(3, "exploration contrast", v, d);
    let (v, d) = timed(reward_formulas);
    report(4, "reward formulas", v, d);
    let (v, d) = timed(gradient_checks);
    let v = Verdict { pass: v.pass && d.as_secs_f64() < 20.0, ..v };
    report(5, "gradient checks", v, d);

    let session = Session::new(None).unwrap();
    let run = |f: Family| {
        let spec = ExperimentSpec::for_family(f);
        timed(|| run_family(&session, f, &spec).unwrap())
    };

    let (locus, d) = run(Family::Locus);
    report(6, "locus ordering", locus_ordering(&locus, d), d);
    let (strategy, d) = run(Family::Strategy);
    report(7, "strategy ordering", strategy_ordering(&strategy, d), d);
    let (ablation, d) = run(Family::Ablation);
    report(8, "gentleness", gentleness(&ablation), d);
    let (fullpose, d) = run(Family::FullPose);
    report(9, "full-pose necessity", fullpose_necessity(&fullpose), d);
    // A fresh session so cached source policies do not hide training time.
    let transfer_spec = ExperimentSpec::for_family(Family::Transfer);
    let (tr, d) = timed(|| run_family(&Session::new(None).unwrap(), Family::Transfer, &transfer_spec).unwrap());
    report(10, "transfer", transfer(&tr, d), d);
    let (v, d) = timed(|| determinism(&tr, &transfer_spec));
    report(11, "determinism", v, d);

    let failed: Vec<String> = verdicts.iter().filter(|(_, _, v)| !v.pass).map(|(n, name, _)| format!("{n} {name}")).collect();
    println!("{} of {} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
