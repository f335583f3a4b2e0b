//! Unit conversions between the 3D (SI) and 0D (clinical) sides.

pub const PA_PER_MMHG: f64 = 133.322;
pub const ML_PER_M3: f64 = 1.0e6;
pub const M_PER_MM: f64 = 1.0e-3;

#[inline]
pub fn mmhg_to_pa(p: f64) -> f64 {
    p * PA_PER_MMHG
}

#[inline]
pub fn pa_to_mmhg(p: f64) -> f64 {
    p / PA_PER_MMHG
}

#[inline]
pub fn m3_to_ml(v: f64) -> f64 {
    v * ML_PER_M3
}

#[inline]
pub fn ml_to_m3(v: f64) -> f64 {
    v / ML_PER_M3
}
