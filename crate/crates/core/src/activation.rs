//! Scalar activations with analytic first and second derivatives.

use crate::math;

/// Slope of the sigmoid gate inside swish: `swish(z) = z / (1 + e^(-0.1 z))`.
const SWISH_BETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    /// `z^2 / 2`, so σ' = z and σ'' = 1.
    Quadratic,
    Identity,
    Swish,
}

impl Activation {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Quadratic => 0.5 * z * z,
            Activation::Identity => z,
            Activation::Swish => z * sigmoid(SWISH_BETA * z),
        }
    }

    /// First derivative. For relu the subgradient convention σ'(0) = 0 is
    /// used.
    pub fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = math::tanh(z);
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Quadratic => z,
            Activation::Identity => 1.0,
            Activation::Swish => {
                let s = sigmoid(SWISH_BETA * z);
                s + z * SWISH_BETA * s * (1.0 - s)
            }
        }
    }

    /// Second derivative. Identically zero almost everywhere for relu, which
    /// is why second-order operations refuse relu specs.
    pub fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = math::tanh(z);
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Relu => 0.0,
            Activation::Quadratic => 1.0,
            Activation::Identity => 0.0,
            Activation::Swish => {
                let s = sigmoid(SWISH_BETA * z);
                let sp = SWISH_BETA * s * (1.0 - s);
                let spp = SWISH_BETA * sp * (1.0 - 2.0 * s);
                2.0 * sp + z * spp
            }
        }
    }

    /// True when σ'' exists and is not identically zero-by-convention, i.e.
    /// the activation is usable in Hessian computations.
    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Quadratic => "quadratic",
            Activation::Identity => "identity",
            Activation::Swish => "swish",
        }
    }
}

#[inline(always)]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + math::exp(-z))
    } else {
        let e = math::exp(z);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd1(a: Activation, z: f64, h: f64) -> f64 {
        (a.eval(z + h) - a.eval(z - h)) / (2.0 * h)
    }

    fn fd2(a: Activation, z: f64, h: f64) -> f64 {
        (a.d1(z + h) - a.d1(z - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let acts = [
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Quadratic,
            Activation::Identity,
            Activation::Swish,
        ];
        for a in acts {
            for &z in &[-3.0, -0.7, 0.0, 0.4, 2.2, 11.0] {
                let h = 1e-6;
                assert!(
                    (a.d1(z) - fd1(a, z, h)).abs() < 1e-7 * (1.0 + a.d1(z).abs()),
                    "{} d1 at {z}",
                    a.name()
                );
                assert!(
                    (a.d2(z) - fd2(a, z, h)).abs() < 1e-6 * (1.0 + a.d2(z).abs()),
                    "{} d2 at {z}",
                    a.name()
                );
            }
        }
    }

    #[test]
    fn quadratic_is_half_square() {
        assert_eq!(Activation::Quadratic.eval(3.0), 4.5);
        assert_eq!(Activation::Quadratic.d1(3.0), 3.0);
        assert_eq!(Activation::Quadratic.d2(3.0), 1.0);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        assert_eq!(Activation::Relu.d1(0.0), 0.0);
        assert!(!Activation::Relu.is_smooth());
    }

    #[test]
    fn swish_matches_definition() {
        // swish(z) = z * (1 + exp(-0.1 z))^(-1)
        for &z in &[-10.0, -1.0, 0.0, 0.5, 7.0] {
            let expected = z / (1.0 + (-0.1 * z_f(z)).exp());
            assert!((Activation::Swish.eval(z) - expected).abs() < 1e-14);
        }
        fn z_f(z: f64) -> f64 {
            z
        }
    }
}
