//! Learned feedback simulator `Ĥ(s, a) → f̂ ∈ [-1, 1]`.
//!
//! Trained online on the trainer's feedback while guidance is live, with
//! every fifth ingested trajectory held out for early stopping, then used
//! as the feedback source once the trainer leaves.

mod offline;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use offline::trajectories_from_logs;

use crate::agents::{share, EncoderKind, NetShape, QNet, QOptim, SharedObs};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Checkpoint, Tensor};

/// One judged step: the observation the trainer saw after the action, the
/// action, and the feedback value.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSample {
    pub obs: SharedObs,
    pub action: Vec<f64>,
    pub feedback: f64,
}

impl SimSample {
    pub fn new(obs: &[f64], action: &[f64], feedback: f64) -> Self {
        SimSample {
            obs: share(obs),
            action: action.to_vec(),
            feedback,
        }
    }
}

pub type Trajectory = Vec<SimSample>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Every fifth trajectory (1-based ingestion index divisible by 5) goes to
/// validation; the split depends only on the index, never on content.
pub fn split_for(index: usize) -> Split {
    if index % 5 == 0 {
        Split::Validation
    } else {
        Split::Train
    }
}

/// Symmetry `k` of the square (0 = identity; bit 0 mirrors x, bit 1
/// mirrors y, bit 2 transposes) applied to cell `(x, y)` of an `n × n` grid.
pub fn dihedral(k: u8, x: usize, y: usize, n: usize) -> (usize, usize) {
    let x = if k & 1 != 0 { n - 1 - x } else { x };
    let y = if k & 2 != 0 { n - 1 - y } else { y };
    if k & 4 != 0 {
        (y, x)
    } else {
        (x, y)
    }
}

/// The same symmetry on a position in `[0, 1]²`.
pub fn dihedral_unit(k: u8, x: f64, y: f64) -> (f64, f64) {
    let x = if k & 1 != 0 { 1.0 - x } else { x };
    let y = if k & 2 != 0 { 1.0 - y } else { y };
    if k & 4 != 0 {
        (y, x)
    } else {
        (x, y)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryStore {
    train: Vec<Trajectory>,
    validation: Vec<Trajectory>,
    ingested: usize,
}

impl TrajectoryStore {
    pub fn new() -> Self {
        TrajectoryStore::default()
    }

    pub fn ingest(&mut self, trajectory: Trajectory) -> Result<Split> {
        if trajectory.is_empty() {
            return Err(Error::Usage("cannot ingest an empty trajectory".into()));
        }
        self.ingested += 1;
        let split = split_for(self.ingested);
        match split {
            Split::Train => self.train.push(trajectory),
            Split::Validation => self.validation.push(trajectory),
        }
        Ok(split)
    }

    pub fn ingested(&self) -> usize {
        self.ingested
    }

    pub fn train(&self) -> &[Trajectory] {
        &self.train
    }

    pub fn validation(&self) -> &[Trajectory] {
        &self.validation
    }

    fn samples(set: &[Trajectory]) -> Vec<&SimSample> {
        set.iter().flatten().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub encoder: EncoderKind,
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub grad_clip: f64,
    /// Non-improving validation rounds tolerated before stopping.
    pub patience: usize,
    /// Completed episodes between training rounds during a session.
    pub train_every: usize,
    /// Training passes over the train split per round.
    pub epochs_per_round: usize,
    /// Train on a random rotation/reflection of each sample. Only valid
    /// for square grid observations whose action is an `(x, y)` position
    /// in `[0, 1]²`, where the label is invariant under the grid's symmetries.
    /// Sessions only honor it on navigation tasks.
    pub augment: bool,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            encoder: EncoderKind::Conv,
            hidden: 128,
            depth: 3,
            lr: 1e-3,
            batch_size: 8,
            grad_clip: 1.0,
            patience: 5,
            train_every: 2,
            epochs_per_round: 1,
            augment: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationReport {
    pub loss: f64,
    pub improved: bool,
    pub stopped: bool,
}

#[derive(Clone, Debug)]
struct EarlyStop {
    best_loss: f64,
    best: QNet,
    stale: usize,
}

#[derive(Clone, Debug)]
pub struct SimulatorModel {
    config: SimulatorConfig,
    shape: NetShape,
    net: QNet,
    opt: QOptim,
    rng: ChaCha8Rng,
    rounds: usize,
    early: Option<EarlyStop>,
    stopped: bool,
}

impl SimulatorModel {
    pub fn new(obs_shape: [usize; 3], action_dim: usize, config: SimulatorConfig, seed: u64) -> Result<Self> {
        if config.augment && (obs_shape[1] != obs_shape[2] || action_dim != 2) {
            return Err(Error::Config(
                "augmentation needs square observations and 2-d position actions".into(),
            ));
        }
        let shape = NetShape {
            obs_shape,
            action_dim,
            encoder: config.encoder,
            hidden: config.hidden,
            depth: config.depth,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = QNet::new(&shape, &mut rng)?;
        let opt = QOptim::new(
            &net,
            AdamConfig {
                lr: config.lr,
                ..AdamConfig::default()
            },
        );
        Ok(SimulatorModel {
            config,
            shape,
            net,
            opt,
            rng,
            rounds: 0,
            early: None,
            stopped: false,
        })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn is_trained(&self) -> bool {
        self.rounds > 0
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.early.as_ref().map(|e| e.best_loss)
    }

    pub fn fingerprint(&self) -> u64 {
        self.net.fingerprint()
    }

    fn batch(&self, samples: &[&SimSample]) -> Result<(Tensor, Tensor, Vec<f64>)> {
        self.batch_with(samples, &[])
    }

    /// Like `batch`, applying `symmetries[i]` (see [`dihedral`]) to sample `i`.
    fn batch_with(&self, samples: &[&SimSample], symmetries: &[u8]) -> Result<(Tensor, Tensor, Vec<f64>)> {
        let mut obs = Vec::with_capacity(samples.len() * self.shape.obs_len());
        let mut act = Vec::with_capacity(samples.len() * self.shape.action_dim);
        for s in samples {
            if s.obs.len() != self.shape.obs_len() || s.action.len() != self.shape.action_dim {
                return Err(Error::shape(
                    &[self.shape.obs_len(), self.shape.action_dim],
                    &[s.obs.len(), s.action.len()],
                ));
            }
            match symmetries.get(obs.len() / self.shape.obs_len()) {
                Some(&k) if k != 0 => {
                    let [c, h, w] = self.shape.obs_shape;
                    let mut plane = vec![0.0; h * w];
                    for ch in 0..c {
                        let src = &s.obs[ch * h * w..(ch + 1) * h * w];
                        for y in 0..h {
                            for x in 0..w {
                                let (tx, ty) = dihedral(k, x, y, w);
                                plane[ty * w + tx] = src[y * w + x] as f64;
                            }
                        }
                        obs.extend_from_slice(&plane);
                    }
                    let (ax, ay) = dihedral_unit(k, s.action[0], s.action[1]);
                    act.extend_from_slice(&[ax, ay]);
                }
                _ => {
                    obs.extend(s.obs.iter().map(|&v| v as f64));
                    act.extend_from_slice(&s.action);
                }
            }
        }
        let n = samples.len();
        Ok((
            self.shape.obs_batch(n, obs)?,
            Tensor::new(&[n, self.shape.action_dim], act)?,
            samples.iter().map(|s| s.feedback).collect(),
        ))
    }

    /// Mean squared error of the squashed predictions, in chunks.
    fn loss_on(&self, net: &QNet, samples: &[&SimSample]) -> Result<f64> {
        let mut total = 0.0;
        for chunk in samples.chunks(256) {
            let (obs, act, f) = self.batch(chunk)?;
            let raw = net.infer(&obs, &act)?;
            total += raw
                .data()
                .iter()
                .zip(&f)
                .map(|(r, f)| (r.tanh() - f).powi(2))
                .sum::<f64>();
        }
        Ok(total / samples.len() as f64)
    }

    /// One shuffled pass of minibatch updates over the train split (times
    /// `epochs_per_round`). Returns the mean minibatch loss, or `None` when
    /// there is nothing to train on or training has stopped.
    pub fn train_round(&mut self, store: &TrajectoryStore) -> Result<Option<f64>> {
        let mut samples = TrajectoryStore::samples(store.train());
        if samples.is_empty() || self.stopped {
            return Ok(None);
        }
        let mut total = 0.0;
        let mut batches = 0;
        for _ in 0..self.config.epochs_per_round {
            samples.shuffle(&mut self.rng);
            for chunk in samples.chunks(self.config.batch_size) {
                let symmetries: Vec<u8> = if self.config.augment {
                    chunk.iter().map(|_| self.rng.gen_range(0..8)).collect()
                } else {
                    Vec::new()
                };
                let (obs, act, f) = self.batch_with(chunk, &symmetries)?;
                let raw = self.net.forward(&obs, &act)?;
                let n = chunk.len() as f64;
                let mut loss = 0.0;
                let grad: Vec<f64> = raw
                    .data()
                    .iter()
                    .zip(&f)
                    .map(|(r, f)| {
                        let y = r.tanh();
                        loss += (y - f).powi(2);
                        2.0 * (y - f) * (1.0 - y * y) / n
                    })
                    .collect();
                let mut grads = self.net.backward_params(&Tensor::new(raw.shape(), grad)?)?;
                grads.clip(self.config.grad_clip);
                self.opt.step(&mut self.net, &grads, self.config.lr)?;
                total += loss / n;
                batches += 1;
            }
        }
        self.rounds += 1;
        Ok(Some(total / batches as f64))
    }

    /// Validation MSE with the early-stopping bookkeeping: a new minimum
    /// snapshots the parameters; `patience` stale rounds stop training and
    /// restore the best snapshot.
    pub fn validate_and_maybe_stop(&mut self, store: &TrajectoryStore) -> Result<ValidationReport> {
        let samples = TrajectoryStore::samples(store.validation());
        if samples.is_empty() {
            return Err(Error::Usage("early stopping needs a nonempty validation split".into()));
        }
        let loss = self.loss_on(&self.net, &samples)?;
        let improved = self.early.as_ref().map_or(true, |e| loss < e.best_loss);
        if improved {
            self.early = Some(EarlyStop {
                best_loss: loss,
                best: self.net.snapshot(),
                stale: 0,
            });
        } else if let Some(e) = &mut self.early {
            e.stale += 1;
            if e.stale >= self.config.patience {
                self.net = e.best.snapshot();
                self.stopped = true;
            }
        }
        Ok(ValidationReport {
            loss,
            improved,
            stopped: self.stopped,
        })
    }

    /// Validation MSE of the current parameters, without bookkeeping.
    pub fn validation_loss(&self, store: &TrajectoryStore) -> Result<f64> {
        let samples = TrajectoryStore::samples(store.validation());
        if samples.is_empty() {
            return Err(Error::Usage("validation split is empty".into()));
        }
        self.loss_on(&self.net, &samples)
    }

    /// Mean squared error against arbitrary labelled samples.
    pub fn mse(&self, samples: &[SimSample]) -> Result<f64> {
        let refs: Vec<&SimSample> = samples.iter().collect();
        if refs.is_empty() {
            return Err(Error::Usage("no samples to score".into()));
        }
        self.loss_on(&self.net, &refs)
    }

    pub fn predict(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if !self.is_trained() {
            return Err(Error::Usage("simulator has not completed a training round".into()));
        }
        let s = SimSample::new(obs, action, 0.0);
        let (o, a, _) = self.batch(&[&s])?;
        Ok(self.net.infer(&o, &a)?.data()[0].tanh())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint {
            metadata: json!({
                "kind": "simulator",
                "shape": self.shape,
                "config": self.config,
                "rounds": self.rounds,
                "stopped": self.stopped,
            }),
            ..Checkpoint::default()
        };
        self.net.store(&mut ckpt, "simulator");
        self.opt.store(&mut ckpt, "simulator");
        ckpt
    }

    /// Restores a model for prediction; the early-stopping history is not
    /// kept, so further training starts a fresh patience count.
    pub fn from_checkpoint(ckpt: &Checkpoint, seed: u64) -> Result<Self> {
        if ckpt.metadata["kind"] != "simulator" {
            return Err(Error::Checkpoint("not a simulator checkpoint".into()));
        }
        let field = |k: &str| ckpt.metadata[k].clone();
        let shape: NetShape = serde_json::from_value(field("shape"))?;
        let config: SimulatorConfig = serde_json::from_value(field("config"))?;
        Ok(SimulatorModel {
            net: QNet::load(ckpt, "simulator", shape.action_dim)?,
            opt: QOptim::load(ckpt, "simulator")?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            rounds: serde_json::from_value(field("rounds"))?,
            early: None,
            stopped: serde_json::from_value(field("stopped"))?,
            config,
            shape,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn traj(n: usize, f: impl Fn(usize) -> f64) -> Trajectory {
        (0..n)
            .map(|i| SimSample::new(&[i as f64 * 0.1, 1.0], &[0.5], f(i)))
            .collect()
    }

    fn small() -> SimulatorConfig {
        SimulatorConfig {
            encoder: EncoderKind::Mlp,
            hidden: 16,
            depth: 2,
            lr: 1e-2,
            batch_size: 8,
            augment: false,
            ..SimulatorConfig::default()
        }
    }

    #[test]
    fn dihedral_group_acts_on_cells() {
        let n = 5;
        let mut images = Vec::new();
        for k in 0..8u8 {
            let mut seen = vec![false; n * n];
            let mut image = Vec::new();
            for y in 0..n {
                for x in 0..n {
                    let (tx, ty) = dihedral(k, x, y, n);
                    assert!(!seen[ty * n + tx], "symmetry {k} is not a bijection");
                    seen[ty * n + tx] = true;
                    image.push((tx, ty));
                    // cell centers follow the same map
                    let c = |v: usize| (v as f64 + 0.5) / n as f64;
                    let (ux, uy) = dihedral_unit(k, c(x), c(y));
                    assert!((ux - c(tx)).abs() < 1e-12 && (uy - c(ty)).abs() < 1e-12);
                }
            }
            images.push(image);
        }
        images.sort();
        images.dedup();
        assert_eq!(images.len(), 8);
        assert_eq!(dihedral(0, 1, 3, n), (1, 3));
        assert_eq!(dihedral(5, 1, 3, n), (3, 3));
    }

    #[test]
    fn augmented_batch_moves_pixels_and_actions_together() {
        let config = SimulatorConfig { augment: true, hidden: 8, ..small() };
        let m = SimulatorModel::new([2, 3, 3], 2, config, 0).unwrap();
        let mut obs = vec![0.0; 18];
        obs[0 * 9 + 0 * 3 + 2] = 1.0; // channel 0, (x 2, y 0)
        obs[1 * 9 + 1 * 3 + 0] = 0.5; // channel 1, (x 0, y 1)
        let s = SimSample::new(&obs, &[0.9, 0.1], 0.3);
        // mirror x then transpose: (x, y) -> (y, n-1-x)
        let (o, a, f) = m.batch_with(&[&s], &[5]).unwrap();
        let mut expected = vec![0.0; 18];
        expected[0 * 9 + 0 * 3 + 0] = 1.0;
        expected[1 * 9 + 2 * 3 + 1] = 0.5;
        assert_eq!(o.data(), &expected[..]);
        assert_eq!(a.data(), &[0.1, 1.0 - 0.9]);
        assert_eq!(f, vec![0.3]);
        assert!(SimulatorModel::new([2, 3, 4], 2, config, 0).is_err());
        assert!(SimulatorModel::new([2, 3, 3], 3, config, 0).is_err());
    }

    fn model(config: SimulatorConfig) -> SimulatorModel {
        SimulatorModel::new([1, 1, 2], 1, config, 0).unwrap()
    }

    #[test]
    fn one_in_five_split() {
        let mut store = TrajectoryStore::new();
        let splits: Vec<Split> = (0..10).map(|_| store.ingest(traj(2, |_| 0.0)).unwrap()).collect();
        assert_eq!((store.train().len(), store.validation().len()), (8, 2));
        assert_eq!(splits[4], Split::Validation);
        assert_eq!(splits[9], Split::Validation);
        let mut few = TrajectoryStore::new();
        for _ in 0..4 {
            few.ingest(traj(1, |_| 0.0)).unwrap();
        }
        assert_eq!((few.train().len(), few.validation().len()), (4, 0));
        assert!(few.ingest(Vec::new()).is_err());
    }

    #[test]
    fn constant_feedback_is_learned() {
        let mut store = TrajectoryStore::new();
        for _ in 0..5 {
            store.ingest(traj(10, |_| 0.5)).unwrap();
        }
        let mut m = model(small());
        for _ in 0..200 {
            m.train_round(&store).unwrap();
        }
        for i in 0..10 {
            let p = m.predict(&[i as f64 * 0.1, 1.0], &[0.5]).unwrap();
            assert!((p - 0.5).abs() < 0.02, "prediction {p}");
        }
    }

    #[test]
    fn untrained_predict_and_empty_round() {
        let mut m = model(small());
        assert!(m.predict(&[0.0, 0.0], &[0.0]).is_err());
        let before = m.fingerprint();
        assert_eq!(m.train_round(&TrajectoryStore::new()).unwrap(), None);
        assert_eq!(m.fingerprint(), before);
    }

    #[test]
    fn linear_feedback_loss_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = TrajectoryStore::new();
        for _ in 0..4 {
            let t: Trajectory = (0..16)
                .map(|_| {
                    let (x, a): (f64, f64) = (rng.gen(), rng.gen());
                    SimSample::new(&[x, 1.0 - x], &[a], 0.6 * x - 0.4 * a)
                })
                .collect();
            store.ingest(t).unwrap();
        }
        let mut m = model(small());
        let fixed: Vec<SimSample> = store.train()[0].clone();
        let mut losses = vec![];
        for _ in 0..10 {
            m.train_round(&store).unwrap();
            losses.push(m.mse(&fixed).unwrap());
        }
        assert!(losses.last() < losses.first(), "{losses:?}");
    }

    #[test]
    fn early_stop_restores_best_snapshot() {
        let mut store = TrajectoryStore::new();
        for _ in 0..5 {
            store.ingest(traj(4, |i| i as f64 * 0.2 - 0.3)).unwrap();
        }
        let mut m = model(small());
        m.train_round(&store).unwrap();
        let first = m.validate_and_maybe_stop(&store).unwrap();
        assert!(first.improved && !first.stopped);
        let best = m.best_loss().unwrap();
        let best_print = m.fingerprint();
        // perturb parameters so later rounds cannot improve on the snapshot
        let mut stale = 0;
        while !m.is_stopped() {
            for p in m.net.head.params_mut() {
                p.fill(5.0);
            }
            let r = m.validate_and_maybe_stop(&store).unwrap();
            assert!(!r.improved);
            stale += 1;
        }
        assert_eq!(stale, 5);
        assert_eq!(m.fingerprint(), best_print);
        assert_eq!(m.validation_loss(&store).unwrap(), best);
        assert_eq!(m.train_round(&store).unwrap(), None);
    }

    #[test]
    fn validation_requires_holdout() {
        let mut store = TrajectoryStore::new();
        store.ingest(traj(3, |_| 0.1)).unwrap();
        let mut m = model(small());
        m.train_round(&store).unwrap();
        assert!(m.validate_and_maybe_stop(&store).is_err());
    }

    #[test]
    fn predictions_are_bounded_and_deterministic() {
        let mut store = TrajectoryStore::new();
        store.ingest(traj(3, |_| 1.0)).unwrap();
        let mut m = model(small());
        m.train_round(&store).unwrap();
        for p in m.net.head.params_mut() {
            p.scale(50.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (o, a) = ([rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0)], [rng.gen::<f64>()]);
            let p = m.predict(&o, &a).unwrap();
            assert!(p.abs() <= 1.0);
            assert_eq!(p, m.predict(&o, &a).unwrap());
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut store = TrajectoryStore::new();
        store.ingest(traj(3, |_| 0.2)).unwrap();
        let mut m = model(small());
        m.train_round(&store).unwrap();
        let back = SimulatorModel::from_checkpoint(&m.to_checkpoint(), 0).unwrap();
        assert_eq!(back.predict(&[0.3, 1.0], &[0.5]).unwrap(), m.predict(&[0.3, 1.0], &[0.5]).unwrap());
    }
}
