use num_complex::Complex64;

/// Spectral densities of the effective absorption reservoir at the frequency
/// pair `(omega, -omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReservoirCorrelators {
    /// `<a_d^dag(omega) a_d(omega')>`
    pub nn: Complex64,
    /// `<a_d(omega) a_d^dag(omega')>`
    pub n_nbar: Complex64,
    /// `<a_d(omega) a_d(omega')>`
    pub aa: Complex64,
    /// `<a_d^dag(omega) a_d^dag(omega')>`
    pub adad: Complex64,
}

impl ReservoirCorrelators {
    pub fn sum(&self) -> Complex64 {
        self.nn + self.n_nbar + self.aa + self.adad
    }
}

/// Correlators from `sigma_d(omega)` and `sigma_d(omega')`.
pub fn reservoir_correlators(sigma: Complex64, sigma_prime: Complex64) -> ReservoirCorrelators {
    let one = Complex64::new(1.0, 0.0);
    ReservoirCorrelators {
        nn: -sigma * sigma_prime,
        n_nbar: (one - sigma) * (one + sigma_prime),
        aa: -(one - sigma) * sigma_prime,
        adad: sigma * (one + sigma_prime),
    }
}
