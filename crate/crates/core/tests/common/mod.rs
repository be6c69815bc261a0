//! Independent reference implementations shared by the property and
//! acceptance tests.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};

use progresscounts::llmgen::{Transport, TransportError};
use serde_json::{json, Value as Json};

use progresscounts::dsl::{BinOp, Builtin, Expr, FeatureSchema, SemType, Subtask};
use progresscounts::grid::{object, Grid, GridPos};
use progresscounts::rl::dist::{gaussian_log_prob, log_softmax};
use progresscounts::rl::net::Cache;
use progresscounts::rl::{loss_and_grad, Actions, Batch, Head, ObsBatch, PolicyNet, PpoConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Line-by-line port of the reference vector discretizer, including its
/// lazily captured `min{i}` / `max{i}` extras.
#[derive(Debug, Default)]
pub struct ReferenceVectorBinner {
    extras: HashMap<String, f64>,
}

impl ReferenceVectorBinner {
    /// Bins every report of a batch; the first call fixes the extras.
    pub fn compute_bin_from_progress(&mut self, batch: &[Vec<f64>], directions: &[bool]) -> Vec<i64> {
        let k = directions.len();
        let mut vars: Vec<Vec<f64>> = (0..k).map(|i| batch.iter().map(|r| r[i]).collect()).collect();
        for i in 0..k {
            if directions[i] {
                let key = format!("min{i}");
                if !self.extras.contains_key(&key) {
                    let m = vars[i].iter().copied().fold(f64::INFINITY, f64::min);
                    self.extras.insert(key.clone(), m);
                }
                let m = self.extras[&key];
                vars[i] = vars[i].iter().map(|x| (x - m).max(0.0)).collect();
            } else {
                let key = format!("max{i}");
                if !self.extras.contains_key(&key) {
                    let m = vars[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    self.extras.insert(key.clone(), m);
                }
                let m = self.extras[&key];
                vars[i] = if m < 0.0 {
                    vars[i].iter().map(|x| -x).collect()
                } else {
                    vars[i].iter().map(|x| (m - x).max(0.0) / m).collect()
                };
            }
        }
        let mut binning = vec![0i64; batch.len()];
        for (i, var) in vars.iter().enumerate() {
            let scale = (1000 * i64::from(i == k - 1) + 20) as f64;
            for (b, v) in binning.iter_mut().zip(var) {
                // `.long()` truncates toward zero
                *b += (v * scale) as i64;
            }
        }
        binning
    }
}

/// The gridworld combination rule with episode-start clipping.
pub fn reference_grid_bin(vars: &[f64], max_progress: &[f64]) -> f64 {
    let vars: Vec<f64> = vars.iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect();
    let clipped: Vec<f64> = vars.iter().zip(max_progress).map(|(v, m)| v.min(*m)).collect();
    let gate = if clipped[0] == 0.0 { 1.0 } else { 0.0 };
    clipped[0] + 100.0 * clipped[1] * gate
}

/// All-pairs shortest path lengths by repeated relaxation, with moves
/// allowed between 4-neighbours that are both passable. Unreachable pairs
/// stay infinite.
pub fn brute_force_distances(passable: &[bool], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let n = rows * cols;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let adjacent = |a: usize, b: usize| {
        let (ra, ca) = (a / cols, a % cols);
        let (rb, cb) = (b / cols, b % cols);
        ra.abs_diff(rb) + ca.abs_diff(cb) == 1
    };
    for a in (0..n).filter(|&a| passable[a]) {
        for b in (0..n).filter(|&b| passable[b] && adjacent(a, b)) {
            d[a][b] = 1.0;
        }
    }
    // Floyd-Warshall over the edge set
    for k in 0..n {
        for i in 0..n {
            if d[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let through = d[i][k] + d[k][j];
                if through < d[i][j] {
                    d[i][j] = through;
                }
            }
        }
    }
    d
}

/// Grid with walls at `walls`; no border.
pub fn grid_with_walls(rows: usize, cols: usize, walls: &[usize]) -> Grid {
    let mut g = Grid::new(rows, cols);
    for &w in walls {
        g.set(GridPos::new(w / cols, w % cols), progresscounts::grid::Cell::WALL);
    }
    g
}

pub fn passable_mask(g: &Grid) -> Vec<bool> {
    g.cells().map(|(_, c)| c.kind != object::WALL).collect()
}

/// Random well-typed expression generator for round-trip tests.
pub struct ProgramGen<'a> {
    schema: &'a FeatureSchema,
    max_depth: usize,
}

impl<'a> ProgramGen<'a> {
    pub fn new(schema: &'a FeatureSchema, max_depth: usize) -> Self {
        Self { schema, max_depth }
    }

    fn features_of(&self, ty: SemType) -> Vec<String> {
        self.schema.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n.to_string()).collect()
    }

    fn constant<R: Rng>(&self, rng: &mut R) -> Expr {
        let v = match rng.random_range(0..3) {
            0 => rng.random_range(-20i32..=20) as f64,
            1 => rng.random_range(-4000i32..=4000) as f64 / 1000.0,
            _ => *[0.5, 2.0, 100.0, 0.001, -1.0].choose(rng).unwrap(),
        };
        Expr::Const(v)
    }

    pub fn subtasks<R: Rng>(&self, rng: &mut R) -> Vec<Subtask> {
        let k = rng.random_range(1..=3);
        (0..k).map(|_| Subtask { expr: self.scalar(rng, 0), increasing: rng.random_bool(0.5) }).collect()
    }

    pub fn scalar<R: Rng>(&self, rng: &mut R, depth: usize) -> Expr {
        let scalars = self.features_of(SemType::Scalar);
        let vecs = self.features_of(SemType::Vec3);
        let quats = self.features_of(SemType::Quat);
        let has_grid = !self.features_of(SemType::Grid).is_empty();
        let leaf = depth >= self.max_depth;
        loop {
            match rng.random_range(0..9) {
                0 => return self.constant(rng),
                1 if !scalars.is_empty() => return Expr::feature(scalars.choose(rng).unwrap()),
                2 if !leaf => {
                    let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Min, BinOp::Max]
                        .choose(rng)
                        .unwrap();
                    return Expr::binary(op, self.scalar(rng, depth + 1), self.scalar(rng, depth + 1));
                }
                3 if !leaf => {
                    let n = rng.random_range(1..=3);
                    return Expr::Mean((0..n).map(|_| self.scalar(rng, depth + 1)).collect());
                }
                4 if !vecs.is_empty() => {
                    let a = self.vec3(rng, &vecs);
                    let b = self.vec3(rng, &vecs);
                    return Expr::call(Builtin::Dist, vec![a, b]);
                }
                5 if !vecs.is_empty() && self.schema.get("goal_pos") == Some(SemType::Vec3) => {
                    return Expr::call(Builtin::GoalDist, vec![self.vec3(rng, &vecs)]);
                }
                6 if !quats.is_empty() => {
                    let a = Expr::feature(quats.choose(rng).unwrap());
                    let b = Expr::feature(quats.choose(rng).unwrap());
                    return Expr::call(Builtin::RotDist, vec![a, b]);
                }
                7 if !vecs.is_empty() => return Expr::call(Builtin::Norm, vec![self.vec3(rng, &vecs)]),
                8 if has_grid && !leaf => {
                    let path = Expr::call(
                        Builtin::Bfs,
                        vec![Expr::feature("grid"), self.grid_pos(rng, depth + 1), self.grid_pos(rng, depth + 1)],
                    );
                    return Expr::call(Builtin::PathLen, vec![path]);
                }
                _ => {}
            }
        }
    }

    fn vec3<R: Rng>(&self, rng: &mut R, vecs: &[String]) -> Expr {
        Expr::feature(vecs.choose(rng).unwrap())
    }

    fn grid_pos<R: Rng>(&self, rng: &mut R, depth: usize) -> Expr {
        let positions = self.features_of(SemType::GridPos);
        match rng.random_range(0..3) {
            0 => Expr::feature(positions.choose(rng).unwrap()),
            1 => {
                let mut args = vec![Expr::feature("grid"), self.scalar(rng, self.max_depth)];
                if rng.random_bool(0.5) {
                    args.push(self.scalar(rng, self.max_depth));
                }
                Expr::call(Builtin::GetPosition, args)
            }
            _ => {
                let a = Expr::feature(positions.choose(rng).unwrap());
                let b = Expr::feature(positions.choose(rng).unwrap());
                let mut args = vec![Expr::feature("grid"), a, b, self.scalar(rng, self.max_depth.max(depth))];
                for _ in 0..rng.random_range(0..=2) {
                    args.push(self.scalar(rng, self.max_depth));
                }
                Expr::call(Builtin::GetPositionOnPath, args)
            }
        }
    }
}

/// Relative error `|g - fd| / max(|g|, |fd|)` between the analytic PPO
/// gradient and central differences, for a small random network and batch.
/// Old log-probs are the current ones plus small noise, so ratios stay
/// inside the clip range.
pub fn gradient_check_error(head: Head, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, samples) = (5, 6);
    let mut net = PolicyNet::with_sizes(input, 6, 5, head, -0.3, &mut rng);
    // spread the head weights so the policy is far from uniform
    for p in net.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let mut obs = ObsBatch::new();
    let mut cache = Cache::default();
    let mut old_log_probs = Vec::new();
    let mut discrete = Vec::new();
    let mut continuous = Vec::new();
    for _ in 0..samples {
        let row: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        obs.push_dense(&row);
        net.forward(obs.row(obs.len() - 1), &mut cache);
        let lp = match head {
            Head::Categorical(n) => {
                let a = rng.random_range(0..n);
                discrete.push(a);
                log_softmax(&cache.out)[a]
            }
            Head::Gaussian(d) => {
                let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
                let log_std: Vec<f64> = (0..d).map(|i| net.log_std(i)).collect();
                let lp = gaussian_log_prob(&cache.out, &log_std, &a);
                continuous.extend(a);
                lp
            }
        };
        old_log_probs.push(lp + rng.random_range(-0.05..0.05));
    }
    let actions = match head {
        Head::Categorical(_) => Actions::Discrete(discrete),
        Head::Gaussian(d) => Actions::Continuous { dim: d, data: continuous },
    };
    let batch = Batch {
        obs,
        actions,
        old_log_probs,
        advantages: (0..samples).map(|_| rng.random_range(-1.0..1.0)).collect(),
        returns: (0..samples).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let cfg = PpoConfig { entropy_coef: 0.05, ..PpoConfig::default() };
    let idx: Vec<usize> = (0..samples).collect();
    let mut grad = vec![0.0; net.num_params()];
    loss_and_grad(&net, &batch, &idx, &cfg, &mut grad);

    let h = 1e-6;
    let mut scratch = vec![0.0; net.num_params()];
    let base = net.params.clone();
    let mut fd = vec![0.0; base.len()];
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        net.set_params(&p);
        let up = loss_and_grad(&net, &batch, &idx, &cfg, &mut scratch).total;
        p[i] = base[i] - h;
        net.set_params(&p);
        let down = loss_and_grad(&net, &batch, &idx, &cfg, &mut scratch).total;
        fd[i] = (up - down) / (2.0 * h);
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&grad).max(norm(&fd)).max(1e-12)
}

/// One request seen by [`MockTransport`].
#[derive(Debug, Clone)]
pub struct Recorded {
    pub url: String,
    pub bearer: Option<String>,
    pub body: Json,
}

/// Scripted transport: replays queued responses and records requests.
#[derive(Default)]
pub struct MockTransport {
    pub replies: RefCell<VecDeque<Result<Json, TransportError>>>,
    pub seen: RefCell<Vec<Recorded>>,
}

impl MockTransport {
    pub fn new(replies: Vec<Result<Json, TransportError>>) -> Self {
        Self { replies: RefCell::new(replies.into()), seen: RefCell::default() }
    }
}

impl Transport for MockTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Json) -> Result<Json, TransportError> {
        self.seen.borrow_mut().push(Recorded { url: url.into(), bearer: bearer.map(str::to_string), body: body.clone() });
        self.replies.borrow_mut().pop_front().expect("unexpected extra request")
    }
}

/// Chat-completions response carrying `texts` as choices.
pub fn completion_response(texts: &[&str]) -> Json {
    let choices: Vec<Json> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"index": i, "message": {"role": "assistant", "content": t}, "finish_reason": "stop"}))
        .collect();
    json!({"id": "cmpl-test", "object": "chat.completion", "choices": choices})
}

pub fn status(code: u16) -> TransportError {
    TransportError::Status { status: code, body: format!("status {code}") }
}
