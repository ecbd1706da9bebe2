//! Distributed linear array geometries.
//!
//! A geometry is a strictly increasing list of element positions starting at
//! zero, split into contiguous subarrays. Whether the inter-subarray offsets
//! are treated as known (fully calibrated) or as nuisance parameters (partly
//! calibrated) is decided by the bound or estimator that consumes the
//! geometry, not by the geometry itself.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    subarrays: Vec<Range<usize>>,
    wavelength: f64,
}

impl ArrayGeometry {
    /// Builds a geometry from explicit positions (meters) and subarray sizes.
    ///
    /// Positions must start at 0 and be strictly increasing; the sizes must be
    /// non-zero and sum to the number of positions.
    pub fn from_positions(positions: Vec<f64>, sizes: &[usize], wavelength: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry("no elements".into()));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite element position".into()));
        }
        if positions[0] != 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "first element must sit at 0, got {}",
                positions[0]
            )));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(format!(
                "positions must be strictly increasing (elements {} and {})",
                i + 1,
                i + 2
            )));
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::InvalidGeometry("subarrays must be non-empty".into()));
        }
        let total: usize = sizes.iter().sum();
        if total != positions.len() {
            return Err(Error::InvalidGeometry(format!(
                "partition covers {total} elements but {} positions were given",
                positions.len()
            )));
        }
        let mut subarrays = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            subarrays.push(start..start + s);
            start += s;
        }
        Ok(Self {
            positions,
            subarrays,
            wavelength,
        })
    }

    /// `K` identical uniform linear subarrays whose first elements sit at
    /// `interval * (k - 1) * wavelength`.
    pub fn uniform_distributed(
        subarrays: usize,
        elements_per_subarray: usize,
        element_spacing: f64,
        interval: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if subarrays < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 subarrays, got {subarrays}"
            )));
        }
        if elements_per_subarray < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 elements per subarray, got {elements_per_subarray}"
            )));
        }
        if !(element_spacing.is_finite() && element_spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be positive, got {element_spacing}"
            )));
        }
        if !(interval.is_finite() && interval > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "subarray interval must be positive, got {interval}"
            )));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        let pitch = interval * wavelength;
        let extent = (elements_per_subarray - 1) as f64 * element_spacing;
        if extent >= pitch {
            return Err(Error::SubarrayOverlap {
                first: 1,
                second: 2,
                end: extent,
                start: pitch,
            });
        }
        let positions = (0..subarrays)
            .flat_map(|k| {
                (0..elements_per_subarray)
                    .map(move |m| k as f64 * pitch + m as f64 * element_spacing)
            })
            .collect();
        Self::from_positions(positions, &vec![elements_per_subarray; subarrays], wavelength)
    }

    /// `K` uniform linear subarrays whose centroids are drawn uniformly over
    /// a span of `span` meters, conditioned on neighbouring subarrays staying
    /// at least one element spacing apart. The result is shifted to start at
    /// zero.
    pub fn random_distributed(
        subarrays: usize,
        elements_per_subarray: usize,
        element_spacing: f64,
        span: f64,
        wavelength: f64,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        if subarrays == 0 || elements_per_subarray == 0 {
            return Err(Error::InvalidGeometry("subarrays must be non-empty".into()));
        }
        if !(element_spacing.is_finite() && element_spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be positive, got {element_spacing}"
            )));
        }
        let extent = (elements_per_subarray - 1) as f64 * element_spacing;
        let pitch = extent + element_spacing;
        // sorted uniforms on the slack, then spread by the minimum pitch:
        // uniform over all admissible layouts
        let slack = span - extent - (subarrays - 1) as f64 * pitch;
        if !(slack > 0.0) || !span.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "{subarrays} subarrays of extent {extent} do not fit in a span of {span}"
            )));
        }
        let mut u: Vec<f64> = (0..subarrays).map(|_| rng.random::<f64>() * slack).collect();
        u.sort_by(f64::total_cmp);
        let origin = u[0];
        let positions = u
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| {
                let start = s - origin + k as f64 * pitch;
                (0..elements_per_subarray).map(move |m| start + m as f64 * element_spacing)
            })
            .collect();
        Self::from_positions(positions, &vec![elements_per_subarray; subarrays], wavelength)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn n_elements(&self) -> usize {
        self.positions.len()
    }

    pub fn n_subarrays(&self) -> usize {
        self.subarrays.len()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Element index range of subarray `k` (zero-based).
    pub fn subarray(&self, k: usize) -> Range<usize> {
        self.subarrays[k].clone()
    }

    pub fn subarrays(&self) -> &[Range<usize>] {
        &self.subarrays
    }

    pub fn subarray_sizes(&self) -> Vec<usize> {
        self.subarrays.iter().map(|r| r.len()).collect()
    }

    pub fn min_subarray_size(&self) -> usize {
        self.subarrays.iter().map(|r| r.len()).min().unwrap_or(0)
    }

    /// Position of the first element of every subarray. The first entry is 0.
    pub fn inter_subarray_offsets(&self) -> Vec<f64> {
        self.subarrays
            .iter()
            .map(|r| self.positions[r.start])
            .collect()
    }

    /// Positions of subarray `k` relative to its own first element; this is
    /// the part of the geometry a partly calibrated array knows exactly.
    pub fn local_positions(&self, k: usize) -> Vec<f64> {
        let r = self.subarray(k);
        let origin = self.positions[r.start];
        self.positions[r].iter().map(|p| p - origin).collect()
    }

    /// Mean element position of subarray `k`.
    pub fn subarray_centroid(&self, k: usize) -> f64 {
        let r = self.subarray(k);
        let n = r.len() as f64;
        self.positions[r].iter().sum::<f64>() / n
    }

    pub fn centroid(&self) -> f64 {
        self.positions.iter().sum::<f64>() / self.n_elements() as f64
    }

    /// Whole-array aperture D = phi_N.
    pub fn aperture(&self) -> f64 {
        *self.positions.last().unwrap()
    }

    /// Rayleigh limit of the spatial frequency, 2 pi / D, in rad/m.
    pub fn rayleigh_limit(&self) -> f64 {
        2.0 * PI / self.aperture()
    }

    /// Same subarray layout with every position multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let positions = self.positions.iter().map(|p| p * factor).collect();
        Self::from_positions(positions, &self.subarray_sizes(), self.wavelength)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn reference_geometry() -> ArrayGeometry {
        ArrayGeometry::uniform_distributed(10, 10, 0.5, 50.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_ten_by_ten() {
        let g = reference_geometry();
        assert_eq!(g.n_elements(), 100);
        assert_eq!(g.n_subarrays(), 10);
        assert!((g.aperture() - 454.5).abs() < 1e-12);
        let offsets = g.inter_subarray_offsets();
        assert_eq!(offsets[0], 0.0);
        assert!((offsets[9] - 450.0).abs() < 1e-12);
    }

    #[test]
    fn small_uniform_positions() {
        let g = ArrayGeometry::uniform_distributed(2, 2, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(g.positions(), &[0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn overlap_is_rejected() {
        let err = ArrayGeometry::uniform_distributed(2, 3, 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::SubarrayOverlap { first: 1, second: 2, .. }));
    }

    #[test]
    fn touching_subarrays_are_rejected() {
        // last element of subarray 1 would coincide with the first of subarray 2
        assert!(ArrayGeometry::uniform_distributed(2, 3, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn aperture_examples() {
        assert!((reference_geometry().aperture() - 454.5).abs() < 1e-12);
        let two = ArrayGeometry::from_positions(vec![0.0, 0.5], &[2], 1.0).unwrap();
        assert_eq!(two.aperture(), 0.5);
        let single =
            ArrayGeometry::from_positions((0..10).map(|i| i as f64 * 0.5).collect(), &[10], 1.0)
                .unwrap();
        assert_eq!(single.aperture(), 4.5);
    }

    #[test]
    fn rayleigh_limit_examples() {
        let omega = reference_geometry().rayleigh_limit();
        assert!((omega - 2.0 * PI / 454.5).abs() < 1e-15);
        assert!((omega - 0.014).abs() < 5e-4);
        let g = ArrayGeometry::from_positions(vec![0.0, PI, 2.0 * PI], &[3], 1.0).unwrap();
        assert!((g.rayleigh_limit() - 1.0).abs() < 1e-12);
        let g = ArrayGeometry::from_positions(vec![0.0, 1.0, PI], &[3], 1.0).unwrap();
        assert!((g.rayleigh_limit() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_geometry_validation() {
        assert!(ArrayGeometry::from_positions(vec![0.1, 0.5], &[2], 1.0).is_err());
        assert!(ArrayGeometry::from_positions(vec![0.0, 0.5, 0.5], &[3], 1.0).is_err());
        assert!(ArrayGeometry::from_positions(vec![0.0, 0.5, 0.7], &[2], 1.0).is_err());
        assert!(ArrayGeometry::from_positions(vec![0.0, 0.5, 0.7], &[3, 0], 1.0).is_err());
        assert!(ArrayGeometry::from_positions(vec![0.0, 0.5], &[2], 0.0).is_err());
        assert!(ArrayGeometry::from_positions(vec![], &[], 1.0).is_err());
    }

    #[test]
    fn local_positions_and_centroids() {
        let g = reference_geometry();
        let local = g.local_positions(3);
        assert_eq!(local.len(), 10);
        assert_eq!(local[0], 0.0);
        assert!((local[9] - 4.5).abs() < 1e-12);
        assert!((g.subarray_centroid(1) - 52.25).abs() < 1e-12);
    }

    #[test]
    fn random_layout_is_valid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let g = ArrayGeometry::random_distributed(10, 10, 0.5, 450.0, 1.0, &mut rng).unwrap();
            assert_eq!(g.n_elements(), 100);
            assert_eq!(g.positions()[0], 0.0);
            assert!(g.aperture() <= 450.0);
            assert_eq!(g.subarray_sizes(), vec![10; 10]);
        }
        assert!(ArrayGeometry::random_distributed(10, 10, 0.5, 40.0, 1.0, &mut rng).is_err());
    }
}
