use crate::perf_models::LayerCostModels;
use crate::scalar::{fmax, Scalar};

/// Task durations for one `(m_a, m_e)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Durations<T> {
    pub attention: T,
    pub shared: T,
    pub expert: T,
    /// A2E and E2A share one model.
    pub comm: T,
    /// False when the shared-expert model is identically zero; such tasks
    /// are left out of schedules.
    pub has_shared: bool,
}

impl<T: Scalar> Durations<T> {
    pub fn new(lm: &LayerCostModels<T>, m_a: usize, m_e: T) -> Self {
        let ma = T::of(m_a);
        Self {
            attention: lm.t_a.at(ma),
            shared: lm.t_s.at(ma),
            expert: lm.t_e.at(m_e),
            comm: lm.t_a2e.at(m_e),
            has_shared: !lm.t_s.is_zero(),
        }
    }
}

/// Aggregate stage times driving the ASAS timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageFunctions<T> {
    /// Attention plus shared expert of one chunk.
    pub x: T,
    /// Period of one fine-grained slice on the expert side.
    pub y: T,
    /// Chunk period: `max(x, r_2 * y)`.
    pub f: T,
    /// Round trip of one chunk until its last E2A completes.
    pub g: T,
}

pub fn stage_functions<T: Scalar>(lm: &LayerCostModels<T>, m_a: usize, m_e: T, r_2: usize) -> StageFunctions<T> {
    StageFunctions::from_durations(&Durations::new(lm, m_a, m_e), r_2)
}

impl<T: Scalar> StageFunctions<T> {
    pub fn from_durations(d: &Durations<T>, r_2: usize) -> Self {
        let x = d.attention + d.shared;
        let y = fmax(d.expert, d.comm);
        let r2 = T::of(r_2);
        let f = fmax(x, r2 * y);
        let g = d.attention + d.comm + d.expert + d.comm + (r2 - T::one()) * y;
        Self { x, y, f, g }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn durations(a: f64, s: f64, e: f64, c: f64) -> Durations<f64> {
        Durations {
            attention: a,
            shared: s,
            expert: e,
            comm: c,
            has_shared: s > 0.0,
        }
    }

    #[test]
    fn hand_evaluated() {
        let sf = StageFunctions::from_durations(&durations(2.0, 1.0, 3.0, 1.0), 2);
        assert_eq!((sf.x, sf.y, sf.f, sf.g), (3.0, 3.0, 6.0, 10.0));
    }

    #[test]
    fn no_shared_and_single_slice() {
        let sf = StageFunctions::from_durations(&durations(2.0, 0.0, 3.0, 1.0), 1);
        assert_eq!(sf.x, 2.0);
        assert_eq!(sf.g, 2.0 + 3.0 + 2.0 * 1.0);
        assert!(sf.f >= sf.x && sf.f >= sf.y);
    }
}
