//! Synthetic deforming shapes with exact ground-truth flows.
//!
//! A family fixes a motion (rigid rotation, bending sheet, or a hinged part
//! swinging about an axis) and a base-shape seed. An episode samples points
//! on that shape and poses them at phases 0, 1 and 2. Motion parameters are
//! constant within an episode, so the step from frame 1 to frame 2 repeats
//! the step from frame 0 to frame 1.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Episode, FlowField, Point3, PointCloud};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{Error, Real, Result};

pub const MAX_STEP: Real = FRAC_PI_4 as Real;
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// Rotation about `axis` through the shape centroid by `step` radians per frame.
    RigidRotation { axis: Point3, step: Real },
    /// Height field `amplitude * sin(freq * u + phase + k * phase_step)` over a jittered grid.
    BendingSheet { amplitude: Real, phase_step: Real },
    /// Points on one side of a plane containing `axis` swing about it by `step` per frame.
    ArticulatedHinge { axis: Point3, step: Real },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    RigidRotation,
    BendingSheet,
    ArticulatedHinge,
}

impl MotionKind {
    pub fn name(self) -> &'static str {
        match self {
            MotionKind::RigidRotation => "rigid_rotation",
            MotionKind::BendingSheet => "bending_sheet",
            MotionKind::ArticulatedHinge => "articulated_hinge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rigid_rotation" => Ok(MotionKind::RigidRotation),
            "bending_sheet" => Ok(MotionKind::BendingSheet),
            "articulated_hinge" => Ok(MotionKind::ArticulatedHinge),
            other => Err(Error::invalid(format!("unknown motion family '{other}'"))),
        }
    }
}

impl Motion {
    pub fn kind(&self) -> MotionKind {
        match self {
            Motion::RigidRotation { .. } => MotionKind::RigidRotation,
            Motion::BendingSheet { .. } => MotionKind::BendingSheet,
            Motion::ArticulatedHinge { .. } => MotionKind::ArticulatedHinge,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionFamily {
    pub motion: Motion,
    pub base_seed: u64,
}

/// Ranges used when drawing random family parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanges {
    pub step: (Real, Real),
    pub amplitude: (Real, Real),
}

impl Default for FamilyRanges {
    fn default() -> Self {
        FamilyRanges {
            step: (0.1, 0.3),
            amplitude: (0.1, 0.3),
        }
    }
}

fn random_unit(rng: &mut Rng) -> Point3 {
    loop {
        let mut g = || {
            let v: f64 = StandardNormal.sample(rng);
            v as Real
        };
        let p = Point3::new(g(), g(), g());
        let n = p.norm();
        if n > 1e-6 {
            return p * (1.0 / n);
        }
    }
}

impl MotionFamily {
    /// Draws a family of the given kind with parameters inside `ranges`.
    pub fn random(kind: MotionKind, ranges: &FamilyRanges, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, "family", 0));
        let step = rng.gen_range(ranges.step.0..=ranges.step.1);
        let motion = match kind {
            MotionKind::RigidRotation => Motion::RigidRotation {
                axis: random_unit(&mut rng),
                step,
            },
            MotionKind::BendingSheet => Motion::BendingSheet {
                amplitude: rng.gen_range(ranges.amplitude.0..=ranges.amplitude.1),
                phase_step: step,
            },
            MotionKind::ArticulatedHinge => Motion::ArticulatedHinge {
                axis: random_unit(&mut rng),
                step,
            },
        };
        MotionFamily {
            motion,
            base_seed: derive_seed(seed, "base", 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_step = |s: Real, what: &str| {
            if (0.0..=MAX_STEP).contains(&s) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must lie in [0, pi/4], got {s}")))
            }
        };
        let check_axis = |a: Point3| {
            if a.is_finite() && a.norm() > 1e-9 {
                Ok(())
            } else {
                Err(Error::invalid("motion axis must be a finite non-zero vector"))
            }
        };
        match self.motion {
            Motion::RigidRotation { axis, step } | Motion::ArticulatedHinge { axis, step } => {
                check_axis(axis)?;
                check_step(step, "angular step")
            }
            Motion::BendingSheet {
                amplitude,
                phase_step,
            } => {
                if !(0.0..=1.0).contains(&amplitude) {
                    return Err(Error::invalid(format!("bend amplitude must lie in [0, 1], got {amplitude}")));
                }
                check_step(phase_step, "phase step")
            }
        }
    }
}

/// Rodrigues rotation of `p` about unit `axis`.
pub fn rotate(p: Point3, axis: Point3, angle: Real) -> Point3 {
    let (s, c) = angle.sin_cos();
    p * c + axis.cross(p) * s + axis * (axis.dot(p) * (1.0 - c))
}

/// Shape-level constants derived from the base seed.
struct BaseShape {
    clusters: Vec<(Point3, Point3)>,
    freq: Real,
    phase: Real,
    hinge_dir: Point3,
}

impl BaseShape {
    fn new(family: &MotionFamily) -> Self {
        let mut rng = rng_from_seed(family.base_seed);
        let clusters = (0..4)
            .map(|_| {
                let mut g = || {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v as Real
                };
                let center = Point3::new(g(), g(), g()) * 0.6;
                let spread = Point3::new(
                    rng.gen_range(0.1..0.35),
                    rng.gen_range(0.1..0.35),
                    rng.gen_range(0.1..0.35),
                );
                (center, spread)
            })
            .collect();
        let freq = rng.gen_range(0.5 * PI as Real..PI as Real);
        let phase = rng.gen_range(0.0..2.0 * PI as Real);
        let axis = match family.motion {
            Motion::ArticulatedHinge { axis, .. } => axis * (1.0 / axis.norm()),
            _ => Point3::new(0.0, 0.0, 1.0),
        };
        // direction perpendicular to the hinge axis that selects the moving part
        let r = random_unit(&mut rng);
        let mut d = r - axis * axis.dot(r);
        if d.norm() < 1e-6 {
            d = axis.cross(Point3::new(1.0, 0.0, 0.0));
            if d.norm() < 1e-6 {
                d = axis.cross(Point3::new(0.0, 1.0, 0.0));
            }
        }
        BaseShape {
            clusters,
            freq,
            phase,
            hinge_dir: d * (1.0 / d.norm()),
        }
    }

    /// Points in rest position for the blob shapes, or `(u, v, 0)` grid
    /// coordinates for the sheet.
    fn sample(&self, motion: &Motion, n: usize, rng: &mut Rng) -> Vec<Point3> {
        match motion {
            Motion::BendingSheet { .. } => {
                let m = (n as f64).sqrt().ceil() as usize;
                let spacing = 2.0 / m as Real;
                let cells = rand::seq::index::sample(rng, m * m, n).into_vec();
                let mut cells = cells;
                cells.sort_unstable();
                cells
                    .into_iter()
                    .map(|c| {
                        let (i, j) = (c / m, c % m);
                        let ju = rng.gen_range(-0.25..0.25) * spacing;
                        let jv = rng.gen_range(-0.25..0.25) * spacing;
                        Point3::new(
                            -1.0 + (i as Real + 0.5) * spacing + ju,
                            -1.0 + (j as Real + 0.5) * spacing + jv,
                            0.0,
                        )
                    })
                    .collect()
            }
            _ => {
                let pts: Vec<Point3> = (0..n)
                    .map(|_| {
                        let (c, s) = self.clusters[rng.gen_range(0..self.clusters.len())];
                        let mut g = || {
                            let v: f64 = StandardNormal.sample(rng);
                            v as Real
                        };
                        c + Point3::new(g() * s.x, g() * s.y, g() * s.z)
                    })
                    .collect();
                let mut centroid = Point3::ZERO;
                for &p in &pts {
                    centroid += p;
                }
                let centroid = centroid * (1.0 / n as Real);
                pts.into_iter().map(|p| p - centroid).collect()
            }
        }
    }

    /// Position of rest point `p` at phase `k`.
    fn pose(&self, motion: &Motion, p: Point3, k: Real) -> Point3 {
        match *motion {
            Motion::RigidRotation { axis, step } => rotate(p, axis * (1.0 / axis.norm()), k * step),
            Motion::BendingSheet {
                amplitude,
                phase_step,
            } => Point3::new(
                p.x,
                p.y,
                amplitude * (self.freq * p.x + self.phase + k * phase_step).sin(),
            ),
            Motion::ArticulatedHinge { axis, step } => {
                if p.dot(self.hinge_dir) > 0.0 {
                    rotate(p, axis * (1.0 / axis.norm()), k * step)
                } else {
                    p
                }
            }
        }
    }
}

/// Episode of three posed frames on a shared base sample, with exact flows.
pub fn gen_episode(family: &MotionFamily, n_points: usize, seed: u64) -> Result<Episode> {
    gen_episode_with(family, n_points, seed, false)
}

/// As [`gen_episode`]; with `resample` each frame draws its own points from the
/// shape, and `gt_flows[k]` moves frame `k`'s own points one phase forward.
pub fn gen_episode_with(
    family: &MotionFamily,
    n_points: usize,
    seed: u64,
    resample: bool,
) -> Result<Episode> {
    family.validate()?;
    if n_points < MIN_POINTS {
        return Err(Error::invalid(format!("episodes need at least {MIN_POINTS} points, got {n_points}")));
    }
    let shape = BaseShape::new(family);
    let motion = family.motion;
    let mut rng = rng_from_seed(derive_seed(seed, "episode-points", 0));
    let base = shape.sample(&motion, n_points, &mut rng);

    let flow_for = |rest: &[Point3], k: usize| -> Vec<Point3> {
        rest.iter()
            .map(|&p| shape.pose(&motion, p, (k + 1) as Real) - shape.pose(&motion, p, k as Real))
            .collect()
    };

    let mut frames: Vec<PointCloud> = Vec::with_capacity(3);
    let mut flows: Vec<FlowField> = Vec::with_capacity(2);
    if resample {
        for k in 0..3 {
            let rest = if k == 0 {
                base.clone()
            } else {
                shape.sample(&motion, n_points, &mut rng)
            };
            let posed = rest.iter().map(|&p| shape.pose(&motion, p, k as Real)).collect();
            frames.push(PointCloud::new(posed, k as u32)?);
            if k < 2 {
                flows.push(FlowField::new(flow_for(&rest, k), k as u32)?);
            }
        }
    } else {
        let first: Vec<Point3> = base.iter().map(|&p| shape.pose(&motion, p, 0.0)).collect();
        frames.push(PointCloud::new(first, 0)?);
        for k in 0..2 {
            let flow = FlowField::new(flow_for(&base, k), k as u32)?;
            let next = crate::geometry::apply_flow(&frames[k], &flow)?;
            frames.push(next);
            flows.push(flow);
        }
    }
    let frames: [PointCloud; 3] = frames.try_into().expect("three frames");
    let flows: [FlowField; 2] = flows.try_into().expect("two flows");
    Episode::new(
        frames,
        Some(flows),
        format!("{}-s{seed}", motion.kind().name()),
    )
}

/// Seed used for episode `index` of a dataset.
pub fn episode_seed(dataset_seed: u64, index: u64) -> u64 {
    derive_seed(dataset_seed, "dataset-episode", index)
}

/// `episodes_per_family` episodes of every family, family-major. Ids look like
/// `f003-rigid_rotation-e001`.
pub fn gen_dataset(
    families: &[MotionFamily],
    episodes_per_family: usize,
    n_points: usize,
    seed: u64,
) -> Result<Vec<Episode>> {
    if families.is_empty() {
        return Err(Error::invalid("gen_dataset needs at least one family"));
    }
    let mut out = Vec::with_capacity(families.len() * episodes_per_family);
    for (f, fam) in families.iter().enumerate() {
        for e in 0..episodes_per_family {
            let idx = (f * episodes_per_family + e) as u64;
            let mut ep = gen_episode(fam, n_points, episode_seed(seed, idx))?;
            ep.episode_id = format!("f{f:03}-{}-e{e:03}", fam.motion.kind().name());
            out.push(ep);
        }
    }
    Ok(out)
}

/// One randomly drawn family per episode, all of one kind.
pub fn gen_random_dataset(
    kind: MotionKind,
    ranges: &FamilyRanges,
    n_episodes: usize,
    n_points: usize,
    seed: u64,
) -> Result<Vec<Episode>> {
    let families: Vec<MotionFamily> = (0..n_episodes)
        .map(|i| MotionFamily::random(kind, ranges, derive_seed(seed, "random-family", i as u64)))
        .collect();
    gen_dataset(&families, 1, n_points, seed)
}
