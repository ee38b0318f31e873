//! Experiment configuration: a sectioned key-value file plus environment
//! overrides.
//!
//! Every key is optional; missing keys take the library defaults. Unknown
//! sections or keys are rejected. An environment variable
//! `DEXPLORE_<SECTION>__<KEY>` (for example `DEXPLORE_TRAIN__UPDATES=10`)
//! overrides the file value of `[section] key`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hand::{Category, HandModel, ObjectShape};
use crate::planner::{DistanceWeights, PlannerConfig, PlannerKind};
use crate::resets::{sha256_hex, ExtractConfig};
use crate::rl::{GraspSampler, TrainConfig};
use crate::sim::SimConfig;
use crate::stability::StabilityConfig;

pub const ENV_PREFIX: &str = "DEXPLORE_";

/// Which reset distribution `train` uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResetKind {
    FixedInit,
    StableGraspSampler,
    ExploredRestarts,
    TreeResets,
}

impl FromStr for ResetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fi" => Ok(Self::FixedInit),
            "sgs" => Ok(Self::StableGraspSampler),
            "er" => Ok(Self::ExploredRestarts),
            "tree" => Ok(Self::TreeResets),
            other => Err(Error::Config(format!(
                "unknown reset distribution `{other}` (fi | sgs | er | tree)"
            ))),
        }
    }
}

impl ResetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FixedInit => "fi",
            Self::StableGraspSampler => "sgs",
            Self::ExploredRestarts => "er",
            Self::TreeResets => "tree",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub hand: HandModel,
    pub object: ObjectShape,
    pub sim: SimConfig,
    /// Servo squeeze (m) and settle time (s) of the initial grasp.
    pub grasp_squeeze: f64,
    pub grasp_settle: f64,
    pub planner_kind: PlannerKind,
    pub planner: PlannerConfig,
    /// Half-width of the object position sampling box (m).
    pub planner_box: f64,
    pub planner_angle_window: f64,
    pub stability: StabilityConfig,
    pub extract: ExtractConfig,
    pub reset: ResetKind,
    pub sgs: GraspSampler,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

struct Table {
    values: BTreeMap<(String, String), String>,
    used: BTreeSet<(String, String)>,
}

impl Table {
    fn raw(&mut self, section: &str, key: &str) -> Option<String> {
        let k = (section.to_string(), key.to_string());
        let v = self.values.get(&k).cloned();
        self.used.insert(k);
        v
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|e| {
                Error::Config(format!("[{section}] {key} = `{v}`: {e}"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        let unknown: Vec<String> = self
            .values
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(|(s, k)| format!("[{s}] {k}"))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}

fn parse_vertices(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<f64> = p
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("[object] vertices: {e}")))?;
            match v.as_slice() {
                [x, y] => Ok([*x, *y]),
                _ => Err(Error::Config(
                    "[object] vertices: expected `x y; x y; ...`".into(),
                )),
            }
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses config text and applies overrides given as
    /// `(variable name, value)` pairs; variables without the prefix are
    /// ignored.
    pub fn parse<I>(text: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let ini = ini::Ini::load_from_str(text).map_err(|e| {
            Error::Config(format!("config line {}: {}", e.line, e.msg))
        })?;
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let section = section.ok_or_else(|| {
                    Error::Config(format!("key `{k}` outside of any section"))
                })?;
                values.insert((section.to_lowercase(), k.to_lowercase()), v.to_string());
            }
        }
        for (name, value) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let (section, key) = rest.split_once("__").ok_or_else(|| {
                Error::Config(format!("environment override `{name}` is not {ENV_PREFIX}<SECTION>__<KEY>"))
            })?;
            values.insert((section.to_lowercase(), key.to_lowercase()), value);
        }
        let mut t = Table {
            values,
            used: BTreeSet::new(),
        };
        Self::from_table(&mut t).and_then(|c| t.finish().map(|_| c))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, std::env::vars())
    }

    /// Library defaults with no file and no overrides.
    pub fn defaults() -> Self {
        Self::parse("", std::iter::empty()).expect("defaults are valid")
    }

    fn from_table(t: &mut Table) -> Result<Self> {
        let ref_hand = HandModel::reference();
        let f0 = &ref_hand.fingers()[0];
        let fingers: usize = t.get("hand", "fingers", ref_hand.num_fingers())?;
        let base_radius: f64 = t.get("hand", "base_radius", f0.base[0].hypot(f0.base[1]))?;
        let link1: f64 = t.get("hand", "link1", f0.links[0])?;
        let link2: f64 = t.get("hand", "link2", f0.links[1])?;
        let tip: f64 = t.get("hand", "tip_radius", ref_hand.tip_radius())?;
        if fingers == 0 || fingers > crate::sim::MAX_FINGERS {
            return Err(Error::Config(format!(
                "[hand] fingers must lie in 1..={}",
                crate::sim::MAX_FINGERS
            )));
        }
        let hand = HandModel::ring(fingers, base_radius, [link1, link2], tip);
        let hand = HandModel::new(hand.fingers().to_vec(), hand.tip_radius())
            .map_err(|e| Error::Config(e.to_string()))?;

        let name: String = t.get("object", "name", "disc".to_string())?;
        let kind = t.raw("object", "kind");
        let object = match kind.as_deref() {
            None => ObjectShape::preset(&name),
            Some(k) => {
                let category: Category = t.get("object", "category", Category::Easy)?;
                match k.trim() {
                    "disc" => {
                        let r: f64 = t.get("object", "radius", 0.035)?;
                        ObjectShape::disc(&name, r, category)
                    }
                    "polygon" => {
                        let v = t.raw("object", "vertices").ok_or_else(|| {
                            Error::Config("[object] kind = polygon needs vertices".into())
                        })?;
                        ObjectShape::polygon(&name, &parse_vertices(&v)?, category)
                    }
                    other => {
                        return Err(Error::Config(format!("[object] unknown kind `{other}`")))
                    }
                }
            }
        }
        .map_err(|e| Error::Config(e.to_string()))?;

        let d = SimConfig::for_shape(&object);
        let sim = SimConfig {
            dt: t.get("sim", "dt", d.dt)?,
            servo_gain: t.get("sim", "servo_gain", d.servo_gain)?,
            joint_damping: t.get("sim", "joint_damping", d.joint_damping)?,
            velocity_limit: t.get("sim", "velocity_limit", d.velocity_limit)?,
            contact_stiffness: t.get("sim", "contact_stiffness", d.contact_stiffness)?,
            contact_damping: t.get("sim", "contact_damping", d.contact_damping)?,
            friction: t.get("sim", "friction", d.friction)?,
            tangential_viscosity: t.get("sim", "tangential_viscosity", d.tangential_viscosity)?,
            gravity: t.get("sim", "gravity", d.gravity)?,
            mass: t.get("sim", "mass", d.mass)?,
            inertia: d.inertia,
            drop_height: t.get("sim", "drop_height", d.drop_height)?,
            rollout_duration: t.get("sim", "rollout_duration", d.rollout_duration)?,
            control_steps: t.get("sim", "control_steps", d.control_steps)?,
            contact_tolerance: t.get("sim", "contact_tolerance", d.contact_tolerance)?,
        };
        let sim = SimConfig {
            inertia: t.get("sim", "inertia", object.inertia(sim.mass))?,
            ..sim
        };
        sim.validate()?;

        let grasp_squeeze = t.get("grasp", "squeeze", 0.002)?;
        let grasp_settle = t.get("grasp", "settle", 0.5)?;

        let p = PlannerConfig::default();
        let planner_kind = t.get("planner", "kind", PlannerKind::Grrt)?;
        let planner = PlannerConfig {
            n_max: t.get("planner", "n_max", p.n_max)?,
            max_iterations: t.get("planner", "max_iterations", p.max_iterations)?,
            k_max: t.get("planner", "k_max", p.k_max)?,
            alpha: t.get("planner", "alpha", p.alpha)?,
            bounds: None,
            weights: DistanceWeights {
                joint: t.get("planner", "weight_joint", p.weights.joint)?,
                position: t.get("planner", "weight_position", p.weights.position)?,
                angle: t.get("planner", "weight_angle", p.weights.angle)?,
            },
            resnap_threshold: t.get("planner", "resnap_threshold", p.resnap_threshold)?,
            action_delta: t.get("planner", "action_delta", p.action_delta)?,
            min_contacts: t.get("planner", "min_contacts", p.min_contacts)?,
            coverage_every: t.get("planner", "coverage_every", p.coverage_every)?,
            seed: 0,
        };
        planner.validate()?;
        let planner_box = t.get("planner", "box_half_width", 0.02)?;
        let planner_angle_window = t.get("planner", "angle_window", std::f64::consts::TAU)?;

        let s = StabilityConfig::for_shape(&object);
        let stability = StabilityConfig {
            eps_stab: t.get("stability", "eps_stab", s.eps_stab)?,
            torque_scale: t.get("stability", "torque_scale", s.torque_scale)?,
            tolerance: t.get("stability", "tolerance", s.tolerance)?,
            max_iterations: t.get("stability", "max_iterations", s.max_iterations)?,
        };
        stability.validate()?;

        let e = ExtractConfig::default();
        let extract = ExtractConfig {
            k: t.get("extract", "k", e.k)?,
            cap: t.get("extract", "cap", e.cap)?,
            squeeze: t.get("extract", "squeeze", e.squeeze)?,
            min_contacts: t.get("extract", "min_contacts", e.min_contacts)?,
        };
        extract.validate()?;

        let g = GraspSampler::default();
        let sgs = GraspSampler {
            max_attempts: t.get("sgs", "max_attempts", g.max_attempts)?,
            squeeze: t.get("sgs", "squeeze", g.squeeze)?,
            min_contacts: t.get("sgs", "min_contacts", g.min_contacts)?,
        };

        let tc = TrainConfig::default();
        let (r, pp) = (&tc.reward, &tc.ppo);
        let train = TrainConfig {
            updates: t.get("train", "updates", tc.updates)?,
            steps_per_update: t.get("train", "steps_per_update", tc.steps_per_update)?,
            n_envs: t.get("train", "n_envs", tc.n_envs)?,
            hidden: t.get("train", "hidden", tc.hidden)?,
            init_log_std: t.get("train", "init_log_std", tc.init_log_std)?,
            ppo: crate::rl::PpoConfig {
                gamma: t.get("train", "gamma", pp.gamma)?,
                lambda: t.get("train", "lambda", pp.lambda)?,
                clip: t.get("train", "clip", pp.clip)?,
                lr: t.get("train", "lr", pp.lr)?,
                epochs: t.get("train", "epochs", pp.epochs)?,
                minibatch: t.get("train", "minibatch", pp.minibatch)?,
                value_coef: t.get("train", "value_coef", pp.value_coef)?,
                entropy_coef: t.get("train", "entropy_coef", pp.entropy_coef)?,
                max_grad_norm: t.get("train", "max_grad_norm", pp.max_grad_norm)?,
            },
            reward: crate::rl::RewardConfig {
                w_rot: t.get("reward", "w_rot", r.w_rot)?,
                omega_max: t.get("reward", "omega_max", r.omega_max)?,
                w_v: t.get("reward", "w_v", r.w_v)?,
                w_pos: t.get("reward", "w_pos", r.w_pos)?,
                reward_contacts: t.get("reward", "reward_contacts", r.reward_contacts)?,
                min_contacts: t.get("reward", "min_contacts", r.min_contacts)?,
                horizon: t.get("reward", "horizon", r.horizon)?,
                contact_threshold: t.get("reward", "contact_threshold", r.contact_threshold)?,
                action_scale: t.get("reward", "action_scale", r.action_scale)?,
            },
            eval_every: t.get("train", "eval_every", tc.eval_every)?,
            eval_episodes: t.get("train", "eval_episodes", tc.eval_episodes)?,
            eval_noise: t.get("train", "eval_noise", tc.eval_noise)?,
            explored_capacity: t.get("train", "explored_capacity", tc.explored_capacity)?,
            explored_initial_prob: t.get("train", "explored_initial_prob", tc.explored_initial_prob)?,
            seed: 0,
        };
        train.validate()?;
        let reset = t.get("train", "reset", ResetKind::TreeResets)?;

        let seeds_text: String = t.get("experiment", "seeds", "0".to_string())?;
        let seeds = seeds_text
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("[experiment] seeds: {e}")))?;
        let out = PathBuf::from(t.get("experiment", "out", "out".to_string())?);

        Ok(Self {
            hand,
            object,
            sim,
            grasp_squeeze,
            grasp_settle,
            planner_kind,
            planner,
            planner_box,
            planner_angle_window,
            stability,
            extract,
            reset,
            sgs,
            train,
            seeds,
            out,
        })
    }

    /// SHA-256 over every setting except seeds and the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.out = PathBuf::new();
        sha256_hex(format!("{c:?}").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, std::iter::empty())
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.object.name(), "disc");
        assert_eq!(c.planner.k_max, 64);
        assert_eq!(c.train.reward.horizon, 200);
        assert_eq!(c.seeds, vec![0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse("[planner]\nk_maxx = 3\n").unwrap_err();
        assert!(err.to_string().contains("k_maxx"), "{err}");
        assert!(parse("[nonsense]\na = 1\n").is_err());
    }

    #[test]
    fn bad_values_fail_fast() {
        assert!(parse("[planner]\nk_max = 0\n").is_err());
        assert!(parse("[planner]\nalpha = two\n").is_err());
        assert!(parse("[train]\nreset = magic\n").is_err());
    }

    #[test]
    fn environment_overrides_file() {
        let env = vec![
            ("DEXPLORE_PLANNER__K_MAX".to_string(), "8".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ];
        let c = ExperimentConfig::parse("[planner]\nk_max = 4\n", env).unwrap();
        assert_eq!(c.planner.k_max, 8);
        let bad = vec![("DEXPLORE_PLANNER_K_MAX".to_string(), "8".to_string())];
        assert!(ExperimentConfig::parse("", bad).is_err());
    }

    #[test]
    fn hash_ignores_seeds_but_not_settings() {
        let a = parse("[experiment]\nseeds = 1, 2\n").unwrap();
        let b = parse("[experiment]\nseeds = 3\nout = elsewhere\n").unwrap();
        let c = parse("[train]\nupdates = 7\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.seeds, vec![1, 2]);
    }

    #[test]
    fn custom_polygon_object() {
        let c = parse(
            "[object]\nname = tri\nkind = polygon\ncategory = moderate\nvertices = 0 0; 0.05 0; 0 0.05\n",
        )
        .unwrap();
        assert_eq!(c.object.name(), "tri");
        assert_eq!(c.object.category(), Category::Moderate);
    }
}
