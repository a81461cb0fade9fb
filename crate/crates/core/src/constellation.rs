//! Square M-QAM alphabets with per-axis Gray labels.
//!
//! Points are stored in raster order: point index `col * side + row`, where
//! `col` walks the in-phase levels and `row` the quadrature levels, both from
//! the most negative level upwards. A label carries the Gray code of the
//! column in its high `D/2` bits and the Gray code of the row in its low
//! `D/2` bits. All points are scaled to unit average energy.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mapping::AllocationPlan;

/// Largest supported alphabet.
pub const MAX_ORDER: u32 = 4096;

/// A D-bit constellation label.
pub type Label = u32;

/// Reflected binary Gray code.
pub fn gray_encode(value: u32) -> u32 {
    value ^ (value >> 1)
}

/// Inverse of [`gray_encode`].
pub fn gray_decode(mut gray: u32) -> u32 {
    let mut value = gray;
    while gray > 1 {
        gray >>= 1;
        value ^= gray;
    }
    value
}

/// Checks that `order` is a supported square-QAM size and returns `log2(order)`.
pub fn validate_order(order: u64) -> Result<u32> {
    if (4..=MAX_ORDER as u64).contains(&order)
        && order.is_power_of_two()
        && order.trailing_zeros().is_multiple_of(2)
    {
        Ok(order.trailing_zeros())
    } else {
        Err(Error::InvalidOrder(order))
    }
}

/// An M-point square QAM alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: u32,
    bits_per_symbol: u32,
    side: u32,
    scale: f64,
    points: Vec<Complex64>,
    label_of_point: Vec<Label>,
    point_of_label: Vec<usize>,
}

impl Constellation {
    /// Builds the unit-energy Gray-labelled square QAM alphabet of size `order`.
    pub fn qam(order: u32) -> Result<Self> {
        let bits_per_symbol = validate_order(order as u64)?;
        let half = bits_per_symbol / 2;
        let side = 1u32 << half;
        // mean of |p|^2 over the unscaled odd-integer grid is 2(M-1)/3
        let scale = (1.5 / (order as f64 - 1.0)).sqrt();

        let mut points = Vec::with_capacity(order as usize);
        let mut label_of_point = Vec::with_capacity(order as usize);
        let mut point_of_label = vec![0usize; order as usize];
        for col in 0..side {
            for row in 0..side {
                let i = Self::level(col, side) * scale;
                let q = Self::level(row, side) * scale;
                let label = (gray_encode(col) << half) | gray_encode(row);
                point_of_label[label as usize] = points.len();
                points.push(Complex64::new(i, q));
                label_of_point.push(label);
            }
        }

        Ok(Self {
            order,
            bits_per_symbol,
            side,
            scale,
            points,
            label_of_point,
            point_of_label,
        })
    }

    /// Unscaled odd-integer amplitude of grid level `k`.
    fn level(k: u32, side: u32) -> f64 {
        (2 * k as i64 - (side as i64 - 1)) as f64
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// Number of levels per axis (`sqrt(M)`).
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    pub fn label_of_point(&self, index: usize) -> Label {
        self.label_of_point[index]
    }

    pub fn point_of_label(&self, label: Label) -> usize {
        self.point_of_label[label as usize]
    }

    /// The constellation point carrying `label`.
    pub fn modulate(&self, label: Label) -> Complex64 {
        self.points[self.point_of_label[label as usize]]
    }

    /// Mean of `|p|^2` over all points.
    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Index of the point closest to `received`, ties going to the lowest
    /// point index.
    ///
    /// The squared distance separates into an in-phase and a quadrature term,
    /// and the raster index orders columns before rows, so the joint argmin
    /// (with its tie rule) is the pair of per-axis argmins.
    pub fn nearest_point(&self, received: Complex64) -> usize {
        let col = self.slice_axis(received.re);
        let row = self.slice_axis(received.im);
        (col * self.side + row) as usize
    }

    /// Hard decision followed by the label lookup.
    pub fn detect(&self, received: Complex64) -> Label {
        self.label_of_point[self.nearest_point(received)]
    }

    fn slice_axis(&self, x: f64) -> u32 {
        let last = self.side as i64 - 1;
        let v = (x / self.scale + last as f64) / 2.0;
        // ceil(v - 0.5) rounds half-way cases down, toward the lower index
        let guess = ((v - 0.5).ceil() as i64).clamp(0, last);
        let dist = |k: i64| {
            let d = x - Self::level(k as u32, self.side) * self.scale;
            d * d
        };
        let mut best = guess;
        let mut best_dist = dist(guess);
        for k in [guess - 1, guess + 1] {
            if (0..=last).contains(&k) {
                let d = dist(k);
                if d < best_dist || (d == best_dist && k < best) {
                    best = k;
                    best_dist = d;
                }
            }
        }
        best as u32
    }

    /// Minimum Euclidean distances for the whole alphabet and, when a plan is
    /// supplied, within each user's allocated subset.
    pub fn min_distance(&self, plan: Option<&AllocationPlan>) -> Result<MinDistanceReport> {
        let all: Vec<Complex64> = self.points.clone();
        let full_constellation_dmin = min_pairwise_distance(&all);
        let per_user_dmin = match plan {
            None => Vec::new(),
            Some(plan) => {
                if plan.order() != self.order {
                    return Err(Error::OrderMismatch {
                        plan: plan.order(),
                        constellation: self.order,
                    });
                }
                plan.users()
                    .iter()
                    .map(|user| {
                        let pts: Vec<Complex64> =
                            user.codewords().iter().map(|&l| self.modulate(l)).collect();
                        min_pairwise_distance(&pts)
                    })
                    .collect()
            }
        };
        Ok(MinDistanceReport {
            full_constellation_dmin,
            per_user_dmin,
        })
    }
}

/// Smallest distance between any two of `points`; `+inf` for fewer than two.
fn min_pairwise_distance(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((a - b).norm_sqr());
        }
    }
    best.sqrt()
}

/// Result of [`Constellation::min_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinDistanceReport {
    pub full_constellation_dmin: f64,
    /// One entry per plan user, in plan order. Empty without a plan.
    pub per_user_dmin: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDERS: [u32; 6] = [4, 16, 64, 256, 1024, 4096];

    fn brute_force_nearest(c: &Constellation, r: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in c.points().iter().enumerate() {
            let d = (r - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn rejects_non_square_orders() {
        for bad in [0u32, 1, 2, 5, 8, 32, 128, 2048, 8192, 16384] {
            assert_eq!(
                Constellation::qam(bad),
                Err(Error::InvalidOrder(bad as u64))
            );
        }
    }

    #[test]
    fn qpsk_geometry() {
        let c = Constellation::qam(4).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for p in c.points() {
            assert!((p.re.abs() - s).abs() < 1e-15);
            assert!((p.im.abs() - s).abs() < 1e-15);
            assert!((p.norm_sqr() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sixteen_qam_grid() {
        // {+-1, +-3}^2 has mean energy 10, hence the 1/sqrt(10) scale
        let c = Constellation::qam(16).unwrap();
        let s = 10f64.sqrt();
        let mut levels: Vec<f64> = c.points().iter().map(|p| p.re * s).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(levels.len(), 4);
        for (got, want) in levels.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_energy_for_every_order() {
        for m in ORDERS {
            let c = Constellation::qam(m).unwrap();
            assert!((c.mean_energy() - 1.0).abs() < 1e-12, "M={m}");
            assert_eq!(c.bits_per_symbol(), m.trailing_zeros());
        }
    }

    #[test]
    fn labels_are_a_bijection() {
        for m in ORDERS {
            let c = Constellation::qam(m).unwrap();
            let mut seen = vec![false; m as usize];
            for i in 0..m as usize {
                let l = c.label_of_point(i);
                assert!(!seen[l as usize]);
                seen[l as usize] = true;
                assert_eq!(c.point_of_label(l), i);
            }
        }
    }

    #[test]
    fn gray_adjacency_exhaustive() {
        for m in ORDERS {
            let c = Constellation::qam(m).unwrap();
            let side = c.side() as usize;
            for col in 0..side {
                for row in 0..side {
                    let here = c.label_of_point(col * side + row);
                    if col + 1 < side {
                        let right = c.label_of_point((col + 1) * side + row);
                        assert_eq!((here ^ right).count_ones(), 1, "M={m} I-axis");
                    }
                    if row + 1 < side {
                        let up = c.label_of_point(col * side + row + 1);
                        assert_eq!((here ^ up).count_ones(), 1, "M={m} Q-axis");
                    }
                }
            }
        }
    }

    #[test]
    fn gray_round_trip() {
        for v in 0..4096 {
            assert_eq!(gray_decode(gray_encode(v)), v);
        }
    }

    #[test]
    fn noise_free_detection_recovers_every_label() {
        for m in ORDERS {
            let c = Constellation::qam(m).unwrap();
            for l in 0..m {
                assert_eq!(c.detect(c.modulate(l)), l);
            }
        }
    }

    #[test]
    fn qpsk_exact_point() {
        let c = Constellation::qam(4).unwrap();
        let idx = c.nearest_point(c.modulate(0b10));
        assert_eq!(c.label_of_point(idx), 0b10);
    }

    #[test]
    fn origin_ties_to_lowest_inner_point() {
        let c = Constellation::qam(16).unwrap();
        let inner: Vec<usize> = (0..16)
            .filter(|&i| (c.point(i).norm_sqr() - 0.2).abs() < 1e-12)
            .collect();
        assert_eq!(inner.len(), 4);
        assert_eq!(c.nearest_point(Complex64::new(0.0, 0.0)), inner[0]);
        assert_eq!(brute_force_nearest(&c, Complex64::new(0.0, 0.0)), inner[0]);
    }

    #[test]
    fn small_perturbation_stays_in_decision_region() {
        let c = Constellation::qam(16).unwrap();
        let half_dmin = 1.0 / 10f64.sqrt();
        let offsets = [
            Complex64::new(0.9 * half_dmin, 0.0),
            Complex64::new(0.0, -0.9 * half_dmin),
            Complex64::new(0.6 * half_dmin, 0.6 * half_dmin),
        ];
        for l in 0..16 {
            for off in offsets {
                let r = c.modulate(l) + off;
                assert_eq!(brute_force_nearest(&c, r), c.point_of_label(l));
                assert_eq!(c.nearest_point(r), c.point_of_label(l));
            }
        }
    }

    #[test]
    fn slicer_matches_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in ORDERS {
            let c = Constellation::qam(m).unwrap();
            for _ in 0..10_000 {
                let r = Complex64::new(rng.random_range(-1.6..1.6), rng.random_range(-1.6..1.6));
                assert_eq!(
                    c.nearest_point(r),
                    brute_force_nearest(&c, r),
                    "M={m} r={r}"
                );
            }
        }
    }

    #[test]
    fn min_distance_brute_force_values() {
        let c4 = Constellation::qam(4).unwrap();
        let r = c4.min_distance(None).unwrap();
        assert!((r.full_constellation_dmin - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.per_user_dmin.is_empty());

        let c16 = Constellation::qam(16).unwrap();
        let r = c16.min_distance(None).unwrap();
        assert!((r.full_constellation_dmin - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    }
}
