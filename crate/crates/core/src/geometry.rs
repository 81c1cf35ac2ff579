//! Point clouds, flow fields, episodes and the operations that act on them.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Real, Result};

/// A point (or displacement) in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[Real; 3]", into = "[Real; 3]")]
pub struct Point3 {
    pub x: Real,
    pub y: Real,
    pub z: Real,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: Real, y: Real, z: Real) -> Self {
        Point3 { x, y, z }
    }

    pub fn to_array(self) -> [Real; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Point3) -> Real {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> Real {
        self.dot(self)
    }

    pub fn norm(self) -> Real {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Point3) -> Real {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coord(self, axis: usize) -> Real {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

impl From<[Real; 3]> for Point3 {
    fn from(a: [Real; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [Real; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Real> for Point3 {
    type Output = Point3;
    fn mul(self, s: Real) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Ordered point set. Index `i` identifies a point across operations that
/// preserve order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: u32,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point3>, frame_id: u32) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud { points, frame_id })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::invalid(format!("{what}: point cloud is empty")))
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Point3 {
        let mut s = Point3::ZERO;
        for &p in &self.points {
            s += p;
        }
        s * (1.0 / self.points.len() as Real)
    }

    pub fn with_points(&self, points: Vec<Point3>) -> PointCloud {
        PointCloud {
            points,
            frame_id: self.frame_id,
        }
    }
}

/// Per-point displacements aligned with a source cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub vectors: Vec<Point3>,
    pub source_frame_id: u32,
}

impl FlowField {
    pub fn new(vectors: Vec<Point3>, source_frame_id: u32) -> Result<Self> {
        if let Some(i) = vectors.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("flow vector {i} is not finite")));
        }
        Ok(FlowField {
            vectors,
            source_frame_id,
        })
    }

    pub fn zeros(n: usize, source_frame_id: u32) -> Self {
        FlowField {
            vectors: vec![Point3::ZERO; n],
            source_frame_id,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Element-wise sum of two aligned flows.
    pub fn compose(&self, other: &FlowField) -> Result<FlowField> {
        if self.len() != other.len() {
            return Err(Error::invalid(format!(
                "flow lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(FlowField {
            vectors: self
                .vectors
                .iter()
                .zip(&other.vectors)
                .map(|(&a, &b)| a + b)
                .collect(),
            source_frame_id: self.source_frame_id,
        })
    }

    pub fn mean_magnitude(&self) -> Real {
        if self.vectors.is_empty() {
            return 0.0;
        }
        self.vectors.iter().map(|v| v.norm()).sum::<Real>() / self.vectors.len() as Real
    }
}

/// Three consecutive frames, with exact ground-truth flows when synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub frames: [PointCloud; 3],
    pub gt_flows: Option<[FlowField; 2]>,
    pub episode_id: String,
}

impl Episode {
    pub fn new(
        frames: [PointCloud; 3],
        gt_flows: Option<[FlowField; 2]>,
        episode_id: impl Into<String>,
    ) -> Result<Self> {
        if let Some(flows) = &gt_flows {
            for k in 0..2 {
                if flows[k].len() != frames[k].len() {
                    return Err(Error::invalid(format!(
                        "gt flow {k} has {} vectors but frame {k} has {} points",
                        flows[k].len(),
                        frames[k].len()
                    )));
                }
            }
        }
        Ok(Episode {
            frames,
            gt_flows,
            episode_id: episode_id.into(),
        })
    }
}

/// Similarity transform `p -> (p - translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub translation: Point3,
    pub scale: Real,
}

impl NormalizeTransform {
    pub const IDENTITY: NormalizeTransform = NormalizeTransform {
        translation: Point3::ZERO,
        scale: 1.0,
    };

    pub fn apply_point(&self, p: Point3) -> Point3 {
        (p - self.translation) * self.scale
    }

    pub fn invert_point(&self, p: Point3) -> Point3 {
        p * (1.0 / self.scale) + self.translation
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        cloud.with_points(cloud.points.iter().map(|&p| self.apply_point(p)).collect())
    }

    pub fn invert(&self, cloud: &PointCloud) -> PointCloud {
        cloud.with_points(cloud.points.iter().map(|&p| self.invert_point(p)).collect())
    }

    /// Displacements only see the scale.
    pub fn apply_flow(&self, flow: &FlowField) -> FlowField {
        FlowField {
            vectors: flow.vectors.iter().map(|&v| v * self.scale).collect(),
            source_frame_id: flow.source_frame_id,
        }
    }
}

/// Radius below which a cloud is treated as a single point.
pub const DEGENERATE_RADIUS: Real = 1e-9;

/// Moves each point by its flow vector. The result is labelled as the next frame.
pub fn apply_flow(cloud: &PointCloud, flow: &FlowField) -> Result<PointCloud> {
    if cloud.len() != flow.len() {
        return Err(Error::invalid(format!(
            "cloud has {} points but flow has {} vectors",
            cloud.len(),
            flow.len()
        )));
    }
    Ok(PointCloud {
        points: cloud
            .points
            .iter()
            .zip(&flow.vectors)
            .map(|(&p, &f)| p + f)
            .collect(),
        frame_id: cloud.frame_id + 1,
    })
}

/// Draws `n` points: without replacement when `n <= |cloud|`, otherwise with
/// replacement.
pub fn sample_points(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    cloud.require_non_empty("sample_points")?;
    if n == 0 {
        return Err(Error::invalid("sample_points: n must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let len = cloud.len();
    let points = if n <= len {
        index::sample(&mut rng, len, n)
            .into_iter()
            .map(|i| cloud.points[i])
            .collect()
    } else {
        (0..n).map(|_| cloud.points[rng.gen_range(0..len)]).collect()
    };
    Ok(cloud.with_points(points))
}

/// Transform that centers `cloud` and scales its farthest point to radius 1
/// (scale 1 when the cloud is a single location).
pub fn fit_normalization(cloud: &PointCloud) -> Result<NormalizeTransform> {
    cloud.require_non_empty("fit_normalization")?;
    let centroid = cloud.centroid();
    let radius = cloud
        .points
        .iter()
        .map(|&p| p.distance(centroid))
        .fold(0.0, Real::max);
    let scale = if radius < DEGENERATE_RADIUS {
        1.0
    } else {
        1.0 / radius
    };
    Ok(NormalizeTransform {
        translation: centroid,
        scale,
    })
}

/// Normalizes every frame with the transform fitted on frame 0, so relative
/// motion keeps its magnitude; gt flows are scaled to match.
pub fn normalize_episode(ep: &Episode) -> Result<(Episode, NormalizeTransform)> {
    for (k, f) in ep.frames.iter().enumerate() {
        f.require_non_empty(&format!("normalize_episode frame {k}"))?;
    }
    let t = fit_normalization(&ep.frames[0])?;
    let frames = [t.apply(&ep.frames[0]), t.apply(&ep.frames[1]), t.apply(&ep.frames[2])];
    let gt_flows = ep
        .gt_flows
        .as_ref()
        .map(|[a, b]| [t.apply_flow(a), t.apply_flow(b)]);
    Ok((
        Episode {
            frames,
            gt_flows,
            episode_id: ep.episode_id.clone(),
        },
        t,
    ))
}

/// Independent Gaussian perturbation of every coordinate.
pub fn add_gaussian_noise(cloud: &PointCloud, sigma: Real, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, sigma as f64).expect("sigma validated");
    let mut rng = rng_from_seed(seed);
    let mut draw = || normal.sample(&mut rng) as Real;
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            let dx = draw();
            let dy = draw();
            let dz = draw();
            p + Point3::new(dx, dy, dz)
        })
        .collect();
    Ok(cloud.with_points(points))
}

/// Removes every point within `radius` of `n_holes` seeded centers drawn
/// from the cloud itself.
pub fn cut_holes(cloud: &PointCloud, n_holes: usize, radius: Real, seed: u64) -> Result<PointCloud> {
    cloud.require_non_empty("cut_holes")?;
    if n_holes == 0 {
        return Ok(cloud.clone());
    }
    let mut rng = rng_from_seed(seed);
    let centers: Vec<usize> = (0..n_holes).map(|_| rng.gen_range(0..cloud.len())).collect();
    cut_holes_at(cloud, &centers, radius)
}

/// Ball removal around the given center indices.
pub fn cut_holes_at(cloud: &PointCloud, centers: &[usize], radius: Real) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("hole radius must be > 0, got {radius}")));
    }
    let centers: Vec<Point3> = centers
        .iter()
        .map(|&i| {
            cloud
                .points
                .get(i)
                .copied()
                .ok_or_else(|| Error::invalid(format!("hole center index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<Point3> = cloud
        .points
        .iter()
        .copied()
        .filter(|&p| centers.iter().all(|&c| p.distance(c) > radius))
        .collect();
    if kept.is_empty() {
        return Err(Error::DegenerateInput(
            "cut_holes removed every point of the cloud".into(),
        ));
    }
    Ok(cloud.with_points(kept))
}

/// Cuts away `floor(fraction * n)` points on the positive side of a seeded
/// random plane through the centroid.
pub fn make_partial(cloud: &PointCloud, fraction: Real, seed: u64) -> Result<PointCloud> {
    let mut rng = rng_from_seed(seed);
    let mut draw = || {
        let v: f64 = StandardNormal.sample(&mut rng);
        v as Real
    };
    let mut normal = Point3::new(draw(), draw(), draw());
    while normal.norm() < 1e-6 {
        normal = Point3::new(draw(), draw(), draw());
    }
    let normal = normal * (1.0 / normal.norm());
    make_partial_with_normal(cloud, fraction, normal)
}

/// Removes the points with the largest signed distance along `normal`
/// (ties go to the higher index); survivors keep their order.
pub fn make_partial_with_normal(
    cloud: &PointCloud,
    fraction: Real,
    normal: Point3,
) -> Result<PointCloud> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("partial fraction must lie in (0,1), got {fraction}")));
    }
    cloud.require_non_empty("make_partial")?;
    let n = cloud.len();
    let n_remove = (fraction * n as Real).floor() as usize;
    if n_remove == 0 {
        return Ok(cloud.clone());
    }
    let c = cloud.centroid();
    let mut order: Vec<(Real, usize)> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| ((p - c).dot(normal), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut removed = vec![false; n];
    for &(_, i) in order.iter().rev().take(n_remove) {
        removed[i] = true;
    }
    let kept = cloud
        .points
        .iter()
        .zip(&removed)
        .filter(|(_, &r)| !r)
        .map(|(&p, _)| p)
        .collect();
    Ok(cloud.with_points(kept))
}
