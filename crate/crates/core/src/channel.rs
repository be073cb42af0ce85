//! Aerial path loss with probabilistic line of sight, Rayleigh fading,
//! uniform-planar-array beam gains, received power and SINR.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::env::PowerAllocation;
use crate::error::{Error, Result};
use crate::geometry::LinkGeometry;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform planar array in the y-z plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub m_z: usize,
    pub n_y: usize,
    pub d_z: f64,
    pub d_y: f64,
    /// Per-element gain; boresight gain is `g0 * m_z * n_y`.
    pub g0: f64,
    pub carrier_freq: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        let carrier_freq = 2.0e9;
        let half_wavelength = SPEED_OF_LIGHT / carrier_freq / 2.0;
        Self {
            m_z: 4,
            n_y: 4,
            d_z: half_wavelength,
            d_y: half_wavelength,
            g0: 1.0,
            carrier_freq,
        }
    }
}

impl AntennaConfig {
    pub fn elements(&self) -> usize {
        self.m_z * self.n_y
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.carrier_freq / SPEED_OF_LIGHT
    }

    pub fn boresight_gain(&self) -> f64 {
        self.g0 * self.elements() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_z == 0 || self.n_y == 0 {
            return Err(Error::config("antenna.m_z", "array needs at least one element per axis"));
        }
        if !(self.d_z > 0.0 && self.d_y > 0.0) {
            return Err(Error::config("antenna.d_z", "element spacing must be > 0"));
        }
        if !(self.g0 > 0.0) {
            return Err(Error::config("antenna.g0", "must be > 0"));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::config("antenna.carrier_freq", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub bandwidth: f64,
    /// Noise spectral density in dBm/Hz.
    pub noise_density: f64,
    /// Per-link transmit power cap in watts.
    pub p_max: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            bandwidth: 10.0e6,
            noise_density: -174.0,
            p_max: 1.0,
        }
    }
}

impl RadioParams {
    /// `N0 * B` in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_density + 10.0 * self.bandwidth.log10())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(Error::config("radio.bandwidth", "must be > 0"));
        }
        if !self.noise_density.is_finite() {
            return Err(Error::config("radio.noise_density", "must be finite"));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::config("radio.p_max", "must be > 0"));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Constants of the aerial-UE urban macro path loss model. `f` is in GHz,
/// distances in meters, `h` the UAV height.
///
/// LOS: `los_a + los_b log10(d3d) + los_c log10(f)`
/// NLOS: `nlos_a + (nlos_b - nlos_h log10 h) log10(d3d) + nlos_c log10(40 pi f / 3)`
/// p_LOS: 1 inside `d1`, else `d1/d2d + exp(-d2d/p1)(1 - d1/d2d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub los_a: f64,
    pub los_b: f64,
    pub los_c: f64,
    pub nlos_a: f64,
    pub nlos_b: f64,
    pub nlos_h: f64,
    pub nlos_c: f64,
    pub d1_a: f64,
    pub d1_b: f64,
    pub d1_min: f64,
    pub p1_a: f64,
    pub p1_b: f64,
    /// Exclusive lower bound on the UAV height.
    pub h_min: f64,
    /// Inclusive upper bound on the UAV height.
    pub h_max: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            los_a: 28.0,
            los_b: 22.0,
            los_c: 20.0,
            nlos_a: -17.5,
            nlos_b: 46.0,
            nlos_h: 7.0,
            nlos_c: 20.0,
            d1_a: 294.05,
            d1_b: 432.94,
            d1_min: 18.0,
            p1_a: 233.98,
            p1_b: 0.95,
            h_min: 22.5,
            h_max: 300.0,
        }
    }
}

impl PathLossModel {
    fn check_height(&self, user_height: f64) -> Result<()> {
        if user_height > self.h_min && user_height <= self.h_max {
            Ok(())
        } else {
            Err(Error::HeightOutOfRange {
                height: user_height,
                min: self.h_min,
                max: self.h_max,
            })
        }
    }

    pub fn los_probability(&self, d2d: f64, user_height: f64) -> Result<f64> {
        self.check_height(user_height)?;
        let lh = user_height.log10();
        let d1 = (self.d1_a * lh - self.d1_b).max(self.d1_min);
        let p1 = self.p1_a * lh - self.p1_b;
        Ok(if d2d <= d1 {
            1.0
        } else {
            d1 / d2d + (-d2d / p1).exp() * (1.0 - d1 / d2d)
        })
    }

    pub fn los_db(&self, d3d: f64, carrier_freq: f64) -> f64 {
        self.los_a + self.los_b * d3d.log10() + self.los_c * (carrier_freq / 1e9).log10()
    }

    pub fn nlos_db(&self, d3d: f64, user_height: f64, carrier_freq: f64) -> f64 {
        let f_ghz = carrier_freq / 1e9;
        self.nlos_a
            + (self.nlos_b - self.nlos_h * user_height.log10()) * d3d.log10()
            + self.nlos_c * (40.0 * std::f64::consts::PI * f_ghz / 3.0).log10()
    }

    pub fn path_loss_db(&self, los: bool, d3d: f64, user_height: f64, carrier_freq: f64) -> f64 {
        if los {
            self.los_db(d3d, carrier_freq)
        } else {
            self.nlos_db(d3d, user_height, carrier_freq)
        }
    }

    /// LOS-probability-weighted linear path gain, in dB.
    pub fn expected_gain_db(
        &self,
        d2d: f64,
        d3d: f64,
        user_height: f64,
        carrier_freq: f64,
    ) -> Result<f64> {
        let p = self.los_probability(d2d, user_height)?;
        let g = p * db_to_linear(-self.los_db(d3d, carrier_freq))
            + (1.0 - p) * db_to_linear(-self.nlos_db(d3d, user_height, carrier_freq));
        Ok(linear_to_db(g))
    }

    /// Sample the LOS state and return `(path_loss_db, los)`.
    ///
    /// `user_height` is the absolute UAV height; the AP height only enters
    /// through `d3d`.
    pub fn link_loss<R: Rng + ?Sized>(
        &self,
        d2d: f64,
        d3d: f64,
        user_height: f64,
        carrier_freq: f64,
        rng: &mut R,
    ) -> Result<(f64, bool)> {
        let p = self.los_probability(d2d, user_height)?;
        let los = rng.random::<f64>() < p;
        Ok((self.path_loss_db(los, d3d, user_height, carrier_freq), los))
    }
}

/// Unit-mean exponential power gain (squared Rayleigh amplitude).
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Exp1)
}

/// `|sum_{m<count} exp(j m psi)|^2`
fn factor_power(count: usize, psi: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for m in 0..count {
        let (s, c) = (m as f64 * psi).sin_cos();
        re += c;
        im += s;
    }
    re * re + im * im
}

/// Normalized UPA power gain toward `(theta, phi)` for a beam steered at
/// `(steer_theta, steer_phi)`. Equals `g0 * m_z * n_y` on the steered direction.
pub fn array_gain(
    theta: f64,
    phi: f64,
    steer_theta: f64,
    steer_phi: f64,
    cfg: &AntennaConfig,
) -> f64 {
    let k = cfg.wavenumber();
    let psi_z = k * cfg.d_z * (theta.cos() - steer_theta.cos());
    let psi_y =
        k * cfg.d_y * (theta.sin() * phi.sin() - steer_theta.sin() * steer_phi.sin());
    let af = factor_power(cfg.m_z, psi_z) * factor_power(cfg.n_y, psi_y);
    cfg.g0 * af / cfg.elements() as f64
}

/// Large-scale and small-scale state of one AP to user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub path_loss_db: f64,
    pub los: bool,
    pub fading_power: f64,
    pub theta: f64,
    pub phi: f64,
    pub d3d: f64,
    pub d2d: f64,
}

impl LinkState {
    pub fn new(geometry: LinkGeometry, path_loss_db: f64, los: bool, fading_power: f64) -> Self {
        Self {
            path_loss_db,
            los,
            fading_power,
            theta: geometry.theta,
            phi: geometry.phi,
            d3d: geometry.d3d,
            d2d: geometry.d2d,
        }
    }

    /// `10^(-PL/10)`
    pub fn mean_gain(&self) -> f64 {
        db_to_linear(-self.path_loss_db)
    }

    /// Realized attenuation `h`: path gain times the fading draw.
    pub fn channel_gain(&self) -> f64 {
        self.mean_gain() * self.fading_power
    }
}

/// Row-major `users x aps` matrix of link states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMatrix {
    users: usize,
    aps: usize,
    links: Vec<LinkState>,
}

impl LinkMatrix {
    pub fn new(users: usize, aps: usize, links: Vec<LinkState>) -> Result<Self> {
        if links.len() != users * aps {
            return Err(Error::Shape {
                expected: users * aps,
                got: links.len(),
            });
        }
        Ok(Self { users, aps, links })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn get(&self, user: usize, ap: usize) -> &LinkState {
        &self.links[user * self.aps + ap]
    }

    pub fn get_mut(&mut self, user: usize, ap: usize) -> &mut LinkState {
        &mut self.links[user * self.aps + ap]
    }
}

/// How the gain of an interfering beam is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InterferenceMode {
    /// AP k's beam steered at user n, evaluated in the victim's direction.
    #[default]
    Steered,
    /// Gain evaluated at the interfered user's own angles, i.e. boresight.
    Paper,
}

impl InterferenceMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "steered" => Some(Self::Steered),
            "paper" => Some(Self::Paper),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Steered => "steered",
            Self::Paper => "paper",
        }
    }
}

/// Whether to use realized (`h`) or unit-mean-fading (`10^(-PL/10)`) attenuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attenuation {
    Realized,
    Mean,
}

impl Attenuation {
    fn of(self, link: &LinkState) -> f64 {
        match self {
            Attenuation::Realized => link.channel_gain(),
            Attenuation::Mean => link.mean_gain(),
        }
    }
}

/// Gain of the beam AP `ap` points at `served`, as seen by `victim`.
pub fn interfering_gain(
    links: &LinkMatrix,
    ap: usize,
    served: usize,
    victim: usize,
    antenna: &AntennaConfig,
    mode: InterferenceMode,
) -> f64 {
    let target = links.get(served, ap);
    match mode {
        InterferenceMode::Steered => {
            let v = links.get(victim, ap);
            array_gain(v.theta, v.phi, target.theta, target.phi, antenna)
        }
        InterferenceMode::Paper => {
            array_gain(target.theta, target.phi, target.theta, target.phi, antenna)
        }
    }
}

/// Serving gain of AP `ap` toward `user` with beam tracking.
pub fn serving_gain(links: &LinkMatrix, ap: usize, user: usize, antenna: &AntennaConfig) -> f64 {
    let l = links.get(user, ap);
    array_gain(l.theta, l.phi, l.theta, l.phi, antenna)
}

/// Per-AP received power components `h_ik P_ik G_ik` for `user`'s cluster.
pub fn cluster_components(
    user: usize,
    cluster: &[usize],
    powers: &PowerAllocation,
    links: &LinkMatrix,
    antenna: &AntennaConfig,
    attenuation: Attenuation,
) -> Vec<f64> {
    cluster
        .iter()
        .map(|&k| {
            attenuation.of(links.get(user, k))
                * powers.get(user, k)
                * serving_gain(links, k, user, antenna)
        })
        .collect()
}

/// Total received power at `user` from its serving cluster.
pub fn rx_power(
    user: usize,
    cluster: &[usize],
    powers: &PowerAllocation,
    links: &LinkMatrix,
    antenna: &AntennaConfig,
) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster { user });
    }
    Ok(cluster_components(user, cluster, powers, links, antenna, Attenuation::Realized)
        .iter()
        .sum())
}

/// Interference at `user` from every AP's beams toward all other users.
///
/// Only links with positive power contribute, so inactive users (zero power
/// rows) never interfere.
pub fn interference_power(
    user: usize,
    powers: &PowerAllocation,
    links: &LinkMatrix,
    antenna: &AntennaConfig,
    mode: InterferenceMode,
    attenuation: Attenuation,
) -> f64 {
    let mut total = 0.0;
    for k in 0..links.aps() {
        let h = attenuation.of(links.get(user, k));
        for n in 0..links.users() {
            if n == user {
                continue;
            }
            let p = powers.get(n, k);
            if p > 0.0 {
                total += h * p * interfering_gain(links, k, n, user, antenna, mode);
            }
        }
    }
    total
}

/// Realized SINR of `user` (linear).
pub fn sinr(
    user: usize,
    cluster: &[usize],
    powers: &PowerAllocation,
    links: &LinkMatrix,
    antenna: &AntennaConfig,
    noise_power: f64,
    mode: InterferenceMode,
) -> Result<f64> {
    let signal = rx_power(user, cluster, powers, links, antenna)?;
    let interference =
        interference_power(user, powers, links, antenna, mode, Attenuation::Realized);
    Ok(signal / (noise_power + interference))
}
