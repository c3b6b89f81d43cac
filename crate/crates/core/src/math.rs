//! Float transcendentals that work both with `std` and with `libm` under
//! `no_std`. Everything numeric in this crate goes through these shims.

macro_rules! shim {
    ($(#[$meta:meta])* $name:ident, $std_call:ident, $libm_call:ident) => {
        $(#[$meta])*
        #[inline(always)]
        pub fn $name(x: f64) -> f64 {
            #[cfg(feature = "std")]
            {
                x.$std_call()
            }
            #[cfg(not(feature = "std"))]
            {
                libm::$libm_call(x)
            }
        }
    };
}

shim!(exp, exp, exp);
shim!(ln, ln, log);
shim!(sqrt, sqrt, sqrt);
shim!(tanh, tanh, tanh);
shim!(cos, cos, cos);
shim!(sin, sin, sin);
shim!(abs, abs, fabs);

#[inline(always)]
pub fn powi(x: f64, n: i32) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powi(n)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, n as f64)
    }
}

#[inline(always)]
pub fn hypot2(x: f64, y: f64) -> f64 {
    sqrt(x * x + y * y)
}
