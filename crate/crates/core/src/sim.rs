//! Closed-loop simulation: proximity graph, pose negotiation, mass
//! estimation, control and explicit-Euler integration in synchronous
//! rounds, with robot membership events and metric recording.

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{control_step, ControlDiagnostics, ControlParams, EstimatePolicy};
use crate::error::{Error, Result};
use crate::geometry::Points;
use crate::mass::{self, Kernel, MassVector};
use crate::metrics::{self, CoverageGrid, Frame};
use crate::protocols::{min_gamma, CommGraph, EstimatorScheme, MassEstimator, NegotiationGains, NegotiationState};
use crate::shape::{to_world, validate_density, SamplePointSet, ShapePose, ShapeRegion, WorldSampleSet};

pub type RobotId = u64;

/// Initial orientation interpretations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialOrientation {
    /// Every robot starts from the same angle.
    Constant(f64),
    /// `"random"`: uniform in `[0, 2 pi)` from the run's RNG.
    Random(RandomTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomTag {
    Random,
}

/// Scenario parameters. Defaults are the desk-scale simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dim: usize,
    pub robots: usize,
    /// Control period in seconds.
    pub dt: f64,
    /// Protocol rounds per control period.
    pub estimator_substeps: usize,
    pub estimator_scheme: EstimatorScheme,
    pub duration: f64,
    pub r_sense: f64,
    pub r_avoid: f64,
    pub v_max: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub eps: f64,
    pub seed: u64,
    pub init_min: Vec<f64>,
    pub init_max: Vec<f64>,
    pub initial_orientation: InitialOrientation,
    pub negotiation_tol: f64,
    /// Record metrics and positions every this many control steps.
    pub record_every: usize,
    pub strict_gamma: bool,
    /// Feed true masses to the controllers instead of the estimates.
    pub oracle_mass: bool,
    /// Clamp estimates below at this value instead of failing on non-positive ones.
    pub estimate_floor: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dim: 2,
            robots: 20,
            dt: 0.01,
            estimator_substeps: 10,
            estimator_scheme: EstimatorScheme::default(),
            duration: 60.0,
            r_sense: 5.0,
            r_avoid: 1.0,
            v_max: 1.0,
            beta: 1.5,
            c1: 1.6,
            c2: 1.6,
            alpha: 0.8,
            gamma: 0.01,
            sigma1: 30.0,
            sigma2: 1000.0,
            eps: 1e-8,
            seed: 0,
            init_min: vec![-5.0, -5.0],
            init_max: vec![5.0, 5.0],
            initial_orientation: InitialOrientation::Random(RandomTag::Random),
            negotiation_tol: 1e-6,
            record_every: 10,
            strict_gamma: false,
            oracle_mass: false,
            estimate_floor: None,
        }
    }
}

impl SimConfig {
    pub fn kernel(&self) -> Result<Kernel> {
        Kernel::new(self.beta).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn control_params(&self) -> ControlParams {
        ControlParams {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            eps: self.eps,
            r_avoid: self.r_avoid,
            v_max: self.v_max,
        }
    }

    pub fn negotiation_gains(&self) -> NegotiationGains {
        NegotiationGains {
            c1: self.c1,
            c2: self.c2,
            alpha: self.alpha,
        }
    }

    pub fn estimate_policy(&self) -> EstimatePolicy {
        match self.estimate_floor {
            Some(f) => EstimatePolicy::Clamp(f),
            None => EstimatePolicy::Strict,
        }
    }

    /// Estimator gain bound for `n` robots under this config.
    pub fn min_gamma(&self, n: usize) -> Result<f64> {
        Ok(min_gamma(n, &self.kernel()?, self.v_max))
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(1..=3).contains(&self.dim) {
            return fail(format!("dim must be 1, 2 or 3, got {}", self.dim));
        }
        if self.robots == 0 {
            return Err(Error::Config("robots = 0: at least one robot is required".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if self.estimator_substeps == 0 {
            return fail("estimator_substeps must be at least 1".into());
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return fail(format!("duration must be non-negative, got {}", self.duration));
        }
        if !(self.r_sense > 0.0 && self.r_sense.is_finite()) {
            return fail(format!("r_sense must be positive, got {}", self.r_sense));
        }
        if self.record_every == 0 {
            return fail("record_every must be at least 1".into());
        }
        if !(self.negotiation_tol > 0.0) {
            return fail(format!("negotiation_tol must be positive, got {}", self.negotiation_tol));
        }
        if self.init_min.len() != self.dim || self.init_max.len() != self.dim {
            return fail(format!(
                "init_min and init_max need {} components, got {} and {}",
                self.dim,
                self.init_min.len(),
                self.init_max.len()
            ));
        }
        for (lo, hi) in self.init_min.iter().zip(&self.init_max) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return fail(format!("empty init box component [{lo}, {hi}]"));
            }
        }
        if let Some(f) = self.estimate_floor {
            if !(f > 0.0 && f.is_finite()) {
                return fail(format!("estimate_floor must be positive, got {f}"));
            }
        }
        if let InitialOrientation::Constant(t) = self.initial_orientation {
            if !t.is_finite() {
                return fail("initial_orientation must be finite".into());
            }
        }
        self.kernel()?;
        self.control_params().validate(self.r_sense)?;
        self.negotiation_gains().validate()?;
        MassEstimator::new(0, 0, self.gamma).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Errors in strict mode, warns otherwise, when `gamma < min_gamma(n)`.
    pub fn check_gamma(&self, n: usize) -> Result<()> {
        let bound = self.min_gamma(n)?;
        if self.gamma < bound {
            if self.strict_gamma {
                return Err(Error::GammaBelowBound {
                    gamma: self.gamma,
                    bound,
                });
            }
            warn!("gamma = {} is below min_gamma = {bound:.6} for n = {n}", self.gamma);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventAction {
    AddAt(Points),
    /// Add robots at seeded-uniform positions in the init box.
    AddRandom(usize),
    Remove(Vec<RobotId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledEvent {
    pub time: f64,
    pub action: EventAction,
}

/// Membership events ordered by non-decreasing time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSchedule {
    events: Vec<ScheduledEvent>,
}

impl EventSchedule {
    pub fn new(events: Vec<ScheduledEvent>) -> Result<Self> {
        for w in events.windows(2) {
            if w[1].time < w[0].time {
                return Err(Error::Config(format!(
                    "event times must be non-decreasing ({} after {})",
                    w[1].time, w[0].time
                )));
            }
        }
        if let Some(e) = events.iter().find(|e| !(e.time >= 0.0 && e.time.is_finite())) {
            return Err(Error::Config(format!("invalid event time {}", e.time)));
        }
        Ok(EventSchedule { events })
    }

    pub fn events(&self) -> &[ScheduledEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub t: f64,
    pub step: u64,
    pub ids: Vec<RobotId>,
    pub positions: Points,
    pub velocities: Points,
    pub negotiation: NegotiationState,
    pub estimator: MassEstimator,
    /// Pose agreed by negotiation, latched once converged.
    pub pose: Option<ShapePose>,
    pub next_id: RobotId,
    pub diagnostics: ControlDiagnostics,
    pub disconnected_steps: u64,
}

impl SwarmState {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn index_of(&self, id: RobotId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

/// One recorded row of evaluation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t: f64,
    pub n: usize,
    /// Recorded before the pose negotiation converged.
    pub provisional: bool,
    pub f: f64,
    pub f_max: f64,
    pub f_uni: f64,
    /// Robot-averaged `F` of each robot's own estimate vector; NaN if any estimate is non-positive.
    pub f_est: f64,
    pub f_max_est: f64,
    pub f_uni_est: f64,
    pub e_est: f64,
    pub m_uni: f64,
    /// Percent; NaN outside 2-D.
    pub m_cover: f64,
    pub connected: bool,
    pub min_distance: f64,
}

enum Views {
    Shared(WorldSampleSet),
    PerRobot(Vec<WorldSampleSet>),
}

impl Views {
    fn get(&self, i: usize) -> &WorldSampleSet {
        match self {
            Views::Shared(w) => w,
            Views::PerRobot(v) => &v[i],
        }
    }
}

pub struct Simulation {
    config: SimConfig,
    shape: SamplePointSet,
    kernel: Kernel,
    params: ControlParams,
    policy: EstimatePolicy,
    rng: ChaCha8Rng,
    state: SwarmState,
    coverage_cache: Option<(ShapePose, CoverageGrid)>,
}

impl Simulation {
    /// Seeds robot positions uniformly in the init box; each robot first
    /// interprets its own position as the shape position.
    pub fn new(config: SimConfig, shape: SamplePointSet) -> Result<Self> {
        config.validate()?;
        if shape.dim() != config.dim {
            return Err(Error::Config(format!(
                "shape is {}-D but dim = {}",
                shape.dim(),
                config.dim
            )));
        }
        config.check_gamma(config.robots)?;
        let kernel = config.kernel()?;
        let params = config.control_params();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        if config.init_min.iter().zip(&config.init_max).any(|(a, b)| a == b) {
            warn!("init box is degenerate in at least one axis");
        }
        let positions = sample_box(&mut rng, &config, config.robots);
        let orientations: Vec<f64> = (0..config.robots)
            .map(|_| match config.initial_orientation {
                InitialOrientation::Constant(t) => t,
                InitialOrientation::Random(_) => rng.gen::<f64>() * std::f64::consts::TAU,
            })
            .collect();
        let negotiation = NegotiationState::new(positions.clone(), orientations, config.negotiation_gains())?;
        let estimator =
            MassEstimator::new(config.robots, shape.len(), config.gamma)?.with_scheme(config.estimator_scheme);
        info!("density: {}", validate_density(&shape, config.robots, config.r_avoid));

        let n = config.robots;
        let mut sim = Simulation {
            policy: config.estimate_policy(),
            state: SwarmState {
                t: 0.0,
                step: 0,
                ids: (0..n as u64).collect(),
                velocities: Points::new(config.dim, vec![0.0; n * config.dim])?,
                positions,
                negotiation,
                estimator,
                pose: None,
                next_id: n as u64,
                diagnostics: ControlDiagnostics::default(),
                disconnected_steps: 0,
            },
            config,
            shape,
            kernel,
            params,
            rng,
            coverage_cache: None,
        };
        sim.refresh_estimator()?;
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn shape(&self) -> &SamplePointSet {
        &self.shape
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn state(&self) -> &SwarmState {
        &self.state
    }

    /// Replaces the robot positions, e.g. to start from a hand-made configuration.
    /// Negotiation interpretations are left untouched.
    pub fn set_positions(&mut self, positions: Points) -> Result<()> {
        if positions.len() != self.state.n() || positions.dim() != self.config.dim {
            return Err(Error::invalid("position array does not match the swarm"));
        }
        self.state.positions = positions;
        self.refresh_estimator()
    }

    /// Latches a pose directly, skipping negotiation.
    pub fn set_pose(&mut self, pose: ShapePose) -> Result<()> {
        to_world(&self.shape, &pose)?;
        self.state.pose = Some(pose);
        self.refresh_estimator()
    }

    /// Pose metrics are evaluated against: the latched pose, or the mean
    /// interpretation, which negotiation preserves and converges to.
    pub fn metric_pose(&self) -> ShapePose {
        self.state
            .pose
            .clone()
            .unwrap_or_else(|| self.state.negotiation.mean_pose())
    }

    pub fn metric_world(&self) -> Result<WorldSampleSet> {
        to_world(&self.shape, &self.metric_pose())
    }

    fn views(&self) -> Result<Views> {
        match &self.state.pose {
            Some(pose) => Ok(Views::Shared(to_world(&self.shape, pose)?)),
            None => (0..self.state.n())
                .map(|i| to_world(&self.shape, &self.state.negotiation.pose_of(i)))
                .collect::<Result<Vec<_>>>()
                .map(Views::PerRobot),
        }
    }

    fn refresh_estimator(&mut self) -> Result<()> {
        let views = self.views()?;
        self.state
            .estimator
            .refresh(&self.state.positions, |i| views.get(i).points(), &self.kernel)
    }

    /// True masses in each robot's own frame.
    fn true_masses(&self, views: &Views) -> Result<Vec<MassVector>> {
        match views {
            Views::Shared(w) => {
                let p = mass::mass_vector(&self.state.positions, w.points(), &self.kernel)?;
                Ok(vec![p; self.state.n()])
            }
            Views::PerRobot(v) => v
                .iter()
                .map(|w| mass::mass_vector(&self.state.positions, w.points(), &self.kernel))
                .collect(),
        }
    }

    /// Advances one control period.
    pub fn step(&mut self) -> Result<()> {
        let cfg = &self.config;
        let graph = CommGraph::build(&self.state.positions, cfg.r_sense);
        if !graph.is_connected() {
            self.state.disconnected_steps += 1;
            debug!("t = {:.3}: interaction graph disconnected", self.state.t);
        }
        let dt_sub = cfg.dt / cfg.estimator_substeps as f64;

        if self.state.pose.is_none() {
            for _ in 0..cfg.estimator_substeps {
                self.state.negotiation.step(&graph, dt_sub);
            }
            if self.state.negotiation.converged(cfg.negotiation_tol) {
                let pose = self.state.negotiation.mean_pose();
                debug!("t = {:.3}: pose latched at {:?}", self.state.t, pose);
                self.state.pose = Some(pose);
            }
        }

        let views = self.views()?;
        self.state
            .estimator
            .refresh(&self.state.positions, |i| views.get(i).points(), &self.kernel)?;
        for _ in 0..cfg.estimator_substeps {
            self.state.estimator.step(&graph, dt_sub);
        }

        let truth = if cfg.oracle_mass {
            Some(self.true_masses(&views)?)
        } else {
            None
        };
        let n = self.state.n();
        let mut velocities = Vec::with_capacity(n * cfg.dim);
        for i in 0..n {
            let estimates = match &truth {
                Some(t) => t[i].values(),
                None => self.state.estimator.estimates(i),
            };
            let neighbors = graph.neighbors(i).iter().map(|&j| self.state.positions.get(j));
            let cmd = control_step(
                self.state.positions.get(i),
                views.get(i).points(),
                estimates,
                neighbors,
                &self.kernel,
                &self.params,
                self.policy,
                &mut self.state.diagnostics,
            )?;
            velocities.extend_from_slice(&cmd.v);
        }
        let velocities = Points::new(cfg.dim, velocities)?;
        for i in 0..n {
            let v = velocities.get(i).to_vec();
            for (p, v) in self.state.positions.get_mut(i).iter_mut().zip(&v) {
                *p += cfg.dt * v;
            }
        }
        self.state.velocities = velocities;
        self.state.step += 1;
        self.state.t = self.state.step as f64 * cfg.dt;
        self.state
            .estimator
            .refresh(&self.state.positions, |i| views.get(i).points(), &self.kernel)
    }

    /// Applies a membership change and resets every robot's estimator.
    pub fn apply_event(&mut self, action: &EventAction) -> Result<()> {
        let dim = self.config.dim;
        match action {
            EventAction::Remove(ids) => {
                let mut unique = ids.clone();
                unique.sort_unstable();
                unique.dedup();
                if let Some(&id) = unique.iter().find(|&&id| self.state.index_of(id).is_none()) {
                    return Err(Error::UnknownRobot(id));
                }
                if unique.len() >= self.state.n() {
                    return Err(Error::NoRobots);
                }
                for id in unique {
                    let i = self.state.index_of(id).expect("ids checked above");
                    self.state.ids.remove(i);
                    self.state.positions.remove(i);
                    self.state.velocities.remove(i);
                    self.state.negotiation.remove(i);
                }
            }
            EventAction::AddAt(_) | EventAction::AddRandom(_) => {
                let fresh = match action {
                    EventAction::AddAt(p) => {
                        if p.dim() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                found: p.dim(),
                            });
                        }
                        p.clone()
                    }
                    EventAction::AddRandom(k) => sample_box(&mut self.rng, &self.config, *k),
                    EventAction::Remove(_) => unreachable!(),
                };
                // newcomers join the pose the swarm currently agrees on
                let pose = self.metric_pose();
                for p in fresh.iter() {
                    self.state.ids.push(self.state.next_id);
                    self.state.next_id += 1;
                    self.state.positions.push(p)?;
                    self.state.velocities.push(&vec![0.0; dim])?;
                    self.state.negotiation.push(&pose)?;
                }
            }
        }
        let n = self.state.n();
        if let Err(e) = self.config.check_gamma(n) {
            warn!("after membership change: {e}");
        }
        self.state.estimator =
            MassEstimator::new(n, self.shape.len(), self.config.gamma)?.with_scheme(self.config.estimator_scheme);
        self.refresh_estimator()?;
        info!(
            "t = {:.3}: membership now {n}; {}",
            self.state.t,
            validate_density(&self.shape, n, self.config.r_avoid)
        );
        Ok(())
    }

    /// Evaluates every metric at the current state.
    pub fn record(&mut self) -> Result<MetricsRecord> {
        let pose = self.metric_pose();
        let world = to_world(&self.shape, &pose)?;
        let positions = &self.state.positions;
        let truth = mass::mass_vector(positions, world.points(), &self.kernel)?;
        let sim = mass::similarity(&truth).unwrap_or(mass::Similarity {
            f: f64::NAN,
            f_max: f64::NAN,
            f_uni: f64::NAN,
        });

        let views = self.views()?;
        let per_robot_truth = self.true_masses(&views)?;
        let e_est = metrics::e_est(&self.state.estimator, |i| per_robot_truth[i].values());

        let n = self.state.n();
        let mut est_sum = [0.0; 3];
        let mut est_ok = true;
        for i in 0..n {
            match mass::similarity(&MassVector(self.state.estimator.estimates(i).to_vec())) {
                Ok(s) => {
                    est_sum[0] += s.f;
                    est_sum[1] += s.f_max;
                    est_sum[2] += s.f_uni;
                }
                Err(_) => est_ok = false,
            }
        }
        let est = est_sum.map(|s| if est_ok { s / n as f64 } else { f64::NAN });

        let graph = CommGraph::build(positions, self.config.r_sense);
        let m_cover = if self.config.dim == 2 {
            let stale = !matches!(&self.coverage_cache, Some((p, _)) if *p == pose);
            if stale {
                let grid = CoverageGrid::new(&world.region(), self.shape.spacing() / 4.0)?;
                self.coverage_cache = Some((pose.clone(), grid));
            }
            let (_, grid) = self.coverage_cache.as_ref().expect("coverage grid cached above");
            grid.coverage(&self.state.positions)?
        } else {
            f64::NAN
        };

        Ok(MetricsRecord {
            t: self.state.t,
            n,
            provisional: self.state.pose.is_none(),
            f: sim.f,
            f_max: sim.f_max,
            f_uni: sim.f_uni,
            f_est: est[0],
            f_max_est: est[1],
            f_uni_est: est[2],
            e_est,
            m_uni: metrics::m_uni(&self.state.positions, &graph),
            m_cover,
            connected: graph.is_connected(),
            min_distance: self.state.positions.min_pairwise_distance(),
        })
    }

    pub fn frame(&self) -> Frame {
        Frame {
            t: self.state.t,
            ids: self.state.ids.clone(),
            positions: self.state.positions.clone(),
            velocities: self.state.velocities.clone(),
        }
    }
}

fn sample_box(rng: &mut ChaCha8Rng, config: &SimConfig, count: usize) -> Points {
    let mut coords = Vec::with_capacity(count * config.dim);
    for _ in 0..count {
        for (lo, hi) in config.init_min.iter().zip(&config.init_max) {
            coords.push(lo + (hi - lo) * rng.gen::<f64>());
        }
    }
    Points::new(config.dim, coords).expect("dimension validated")
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub frames: Vec<Frame>,
    pub metrics: Vec<MetricsRecord>,
    /// Shape region under the final metric pose.
    pub region: ShapeRegion,
    pub final_pose: ShapePose,
    pub final_state: SwarmState,
}

impl RunOutput {
    pub fn t_conv(&self) -> Option<f64> {
        metrics::detect_t_conv(&self.frames, &self.region)
    }
}

/// Runs a scenario: events fire at the first step boundary at or after
/// their time; records are taken every `record_every` steps and at the end.
pub fn run(config: &SimConfig, shape: &SamplePointSet, events: &EventSchedule) -> Result<RunOutput> {
    let mut sim = Simulation::new(config.clone(), shape.clone())?;
    run_simulation(&mut sim, events)
}

/// Like [`run`], continuing an already constructed simulation.
pub fn run_simulation(sim: &mut Simulation, events: &EventSchedule) -> Result<RunOutput> {
    let steps = sim.config.steps();
    let every = sim.config.record_every;
    let dt = sim.config.dt;
    let mut pending = events.events().iter().peekable();
    let mut frames = Vec::new();
    let mut records = Vec::new();
    for s in 0..=steps {
        let boundary = s as f64 * dt;
        // tolerate the rounding in s * dt when an event sits on a boundary
        while let Some(ev) = pending.next_if(|e| e.time <= boundary + 1e-9 * dt) {
            sim.apply_event(&ev.action)?;
        }
        if s % every == 0 || s == steps {
            records.push(sim.record()?);
            frames.push(sim.frame());
        }
        if s < steps {
            sim.step()?;
        }
    }
    if pending.peek().is_some() {
        warn!("events scheduled after the end of the run were not applied");
    }
    let final_pose = sim.metric_pose();
    let region = to_world(&sim.shape, &final_pose)?.region();
    Ok(RunOutput {
        frames,
        metrics: records,
        region,
        final_pose,
        final_state: sim.state.clone(),
    })
}
