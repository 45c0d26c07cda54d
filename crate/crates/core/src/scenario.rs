//! Problem instances: configuration, beam geometry, link budget and channels.
//!
//! A [`ScenarioConfig`] is a TOML document with units spelled out in the key
//! names. [`Scenario::generate`] turns it into a fully materialized instance:
//! beam centers, candidate terminals with positions and demands, and the
//! complex channel vector from every feed to every terminal. All dB values are
//! converted to linear units here; nothing downstream works in dB.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// First zero of the Bessel function J1.
const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

// ---------------------------------------------------------------------------
// Configuration document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rng_seed: u64,
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
    pub antenna: AntennaConfig,
    pub traffic: TrafficConfig,
    pub reuse: ReuseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_beams: usize,
    pub num_slots: usize,
    pub max_per_slot: usize,
    pub terminals_per_beam: usize,
    pub p_tot_watts: f64,
    pub p_beam_max_watts: f64,
    pub bandwidth_hz: f64,
    pub noise_power_dbw: f64,
    pub carrier_frequency_hz: f64,
    /// Applied to the per-beam power cap when set.
    pub output_back_off_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub satellite_longitude_deg: f64,
    pub satellite_height_m: f64,
    pub cluster_center_lat_deg: f64,
    pub cluster_center_lon_deg: f64,
    pub beam_radius_m: f64,
    /// Distance between adjacent beam centers; defaults to sqrt(3) * radius.
    pub beam_spacing_m: Option<f64>,
    /// Explicit `[lat, lon]` beam centers, overriding the grid layout.
    pub beam_centers_deg: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    pub boresight_gain_dbi: f64,
    pub edge_gain_dbi: f64,
    /// Sidelobe floor. `None` leaves the pattern nulls untouched.
    pub min_gain_dbi: Option<f64>,
    pub rx_gain_dbi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub demand_min_bps: f64,
    pub demand_max_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReuseConfig {
    pub num_colors: usize,
    /// Explicit color per beam; defaults to a checkerboard over the grid.
    pub colors: Option<Vec<usize>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            rng_seed: 1,
            system: SystemConfig::default(),
            geometry: GeometryConfig::default(),
            antenna: AntennaConfig::default(),
            traffic: TrafficConfig::default(),
            reuse: ReuseConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_beams: 4,
            num_slots: 5,
            max_per_slot: 2,
            terminals_per_beam: 70,
            p_tot_watts: 400.0,
            p_beam_max_watts: 120.0,
            bandwidth_hz: 500e6,
            noise_power_dbw: -126.47,
            carrier_frequency_hz: 20e9,
            output_back_off_db: None,
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            satellite_longitude_deg: 13.0,
            satellite_height_m: 35_786_000.0,
            cluster_center_lat_deg: 50.0,
            cluster_center_lon_deg: 10.0,
            beam_radius_m: 120_000.0,
            beam_spacing_m: None,
            beam_centers_deg: None,
        }
    }
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            boresight_gain_dbi: 54.63,
            edge_gain_dbi: 49.60,
            min_gain_dbi: Some(20.0),
            rx_gain_dbi: 42.1,
        }
    }
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            demand_min_bps: 0.5e9,
            demand_max_bps: 3.5e9,
        }
    }
}

impl Default for ReuseConfig {
    fn default() -> Self {
        Self {
            num_colors: 1,
            colors: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        toml::from_str(doc).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Per-beam cap after the optional output back-off.
    pub fn effective_beam_power_cap(&self) -> f64 {
        let backoff = self.system.output_back_off_db.unwrap_or(0.0);
        self.system.p_beam_max_watts * db_to_linear(-backoff)
    }
}

/// Parses a TOML document and materializes the scenario it describes.
pub fn load_scenario(doc: &str) -> Result<Scenario> {
    Scenario::generate(&ScenarioConfig::from_toml_str(doc)?)
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Self {
        Self { lat_deg, lon_deg }
    }

    /// Earth-centered Cartesian coordinates on a spherical Earth.
    pub fn to_ecef(self) -> [f64; 3] {
        let (lat, lon) = (self.lat_deg.to_radians(), self.lon_deg.to_radians());
        [
            EARTH_RADIUS_M * lat.cos() * lon.cos(),
            EARTH_RADIUS_M * lat.cos() * lon.sin(),
            EARTH_RADIUS_M * lat.sin(),
        ]
    }

    /// Moves the point by a local east/north displacement in meters.
    pub fn offset(self, east_m: f64, north_m: f64) -> Self {
        let dlat = (north_m / EARTH_RADIUS_M).to_degrees();
        let dlon = (east_m / (EARTH_RADIUS_M * self.lat_deg.to_radians().cos())).to_degrees();
        Self::new(self.lat_deg + dlat, self.lon_deg + dlon)
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Geostationary satellite position for a given longitude and altitude.
pub fn satellite_ecef(longitude_deg: f64, height_m: f64) -> [f64; 3] {
    let r = EARTH_RADIUS_M + height_m;
    let lon = longitude_deg.to_radians();
    [r * lon.cos(), r * lon.sin(), 0.0]
}

pub fn slant_distance(satellite: [f64; 3], point: GeoPoint) -> f64 {
    norm(sub(point.to_ecef(), satellite))
}

/// Angle at the satellite between the directions to `boresight` and `point`.
pub fn off_axis_angle(satellite: [f64; 3], boresight: GeoPoint, point: GeoPoint) -> f64 {
    let a = sub(boresight.to_ecef(), satellite);
    let b = sub(point.to_ecef(), satellite);
    norm(cross(a, b)).atan2(dot(a, b))
}

// ---------------------------------------------------------------------------
// Link budget
// ---------------------------------------------------------------------------

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Normalized aperture pattern (2 J1(u)/u)^2, equal to 1 at u = 0.
fn airy(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0
    } else {
        let v = 2.0 * bessel_j1(u) / u;
        v * v
    }
}

/// Tapered circular-aperture gain model, `G(θ) = G_max (2 J1(u)/u)^2` with
/// `u = k a sin θ`.
///
/// `ka` is chosen so the gain at the beam-edge angle equals the configured
/// edge gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamPattern {
    pub peak_gain_dbi: f64,
    pub ka: f64,
    pub floor_dbi: Option<f64>,
}

impl BeamPattern {
    pub fn calibrated(
        peak_gain_dbi: f64,
        edge_gain_dbi: f64,
        edge_angle_rad: f64,
        floor_dbi: Option<f64>,
    ) -> Result<Self> {
        let target = db_to_linear(edge_gain_dbi - peak_gain_dbi);
        if !(target > 0.0 && target < 1.0) || edge_angle_rad <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "cannot calibrate beam pattern: peak {peak_gain_dbi} dBi, edge {edge_gain_dbi} dBi"
            )));
        }
        // airy is strictly decreasing on (0, first zero).
        let (mut lo, mut hi) = (0.0, J1_FIRST_ZERO);
        while hi - lo > 1e-14 * J1_FIRST_ZERO {
            let mid = 0.5 * (lo + hi);
            if airy(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u_edge = 0.5 * (lo + hi);
        Ok(Self {
            peak_gain_dbi,
            ka: u_edge / edge_angle_rad.sin(),
            floor_dbi,
        })
    }

    pub fn gain_linear(&self, angle_rad: f64) -> f64 {
        let g = db_to_linear(self.peak_gain_dbi) * airy(self.ka * angle_rad.sin());
        match self.floor_dbi {
            Some(floor) => g.max(db_to_linear(floor)),
            None => g,
        }
    }

    pub fn gain_dbi(&self, angle_rad: f64) -> f64 {
        linear_to_db(self.gain_linear(angle_rad))
    }
}

/// Satellite antenna gain in dBi at the given off-axis angle.
pub fn beam_gain(off_axis_angle_rad: f64, pattern: &BeamPattern) -> f64 {
    pattern.gain_dbi(off_axis_angle_rad.max(0.0))
}

/// Free-space amplitude factor λ/(4πd). Its square is the power loss.
pub fn free_space_loss(distance_m: f64, frequency_hz: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / frequency_hz;
    wavelength / (4.0 * PI * distance_m)
}

/// Feed-to-terminal coefficient from linear gains, amplitude loss and path length.
///
/// The phase is the free-space delay `-2π d / λ`, reduced modulo one cycle
/// before scaling so it keeps full precision at GEO distances.
pub fn channel_coefficient(
    sat_gain_linear: f64,
    amplitude_loss: f64,
    rx_gain_linear: f64,
    slant_distance_m: f64,
    wavelength_m: f64,
) -> Complex64 {
    let magnitude = (sat_gain_linear * rx_gain_linear).sqrt() * amplitude_loss;
    let cycles = (slant_distance_m / wavelength_m).fract();
    Complex64::from_polar(magnitude, -2.0 * PI * cycles)
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product hᴴ x.
    pub fn inner(&self, x: &[Complex64]) -> Complex64 {
        self.0.iter().zip(x).map(|(h, v)| h.conj() * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub beam_id: usize,
    pub center: GeoPoint,
    pub edge_angle_rad: f64,
    pub pattern: BeamPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub beam_id: usize,
    pub terminal_id: usize,
    pub position: GeoPoint,
    pub channel: ChannelVector,
    pub demand_bps: f64,
}

impl Terminal {
    /// Demand in natural-log rate units (nat/s), matching `B_W ln(1 + γ)`.
    pub fn demand(&self) -> f64 {
        self.demand_bps * LN_2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReusePattern {
    pub num_colors: usize,
    pub color_of_beam: Vec<usize>,
}

impl ReusePattern {
    pub fn new(num_colors: usize, color_of_beam: Vec<usize>) -> Result<Self> {
        if !matches!(num_colors, 1 | 2 | 4) {
            return Err(Error::ReusePattern(num_colors));
        }
        if let Some(&c) = color_of_beam.iter().find(|&&c| c >= num_colors) {
            return Err(Error::InvalidScenario(format!(
                "beam color {c} out of range for {num_colors} colors"
            )));
        }
        Ok(Self {
            num_colors,
            color_of_beam,
        })
    }

    /// Checkerboard coloring of a row-major grid with `cols` columns.
    pub fn grid(num_colors: usize, num_beams: usize, cols: usize) -> Result<Self> {
        let colors = (0..num_beams)
            .map(|b| {
                let (row, col) = (b / cols, b % cols);
                match num_colors {
                    1 => 0,
                    2 => (row + col) % 2,
                    _ => 2 * (row % 2) + col % 2,
                }
            })
            .collect();
        Self::new(num_colors, colors)
    }

    pub fn full_reuse(num_beams: usize) -> Self {
        Self {
            num_colors: 1,
            color_of_beam: vec![0; num_beams],
        }
    }

    pub fn num_beams(&self) -> usize {
        self.color_of_beam.len()
    }

    /// Whether beam `from` interferes with terminals of beam `to`.
    pub fn interferes(&self, from: usize, to: usize) -> bool {
        from != to && self.color_of_beam[from] == self.color_of_beam[to]
    }

    /// Beams sharing the color of `beam`, including itself, in index order.
    pub fn group_of(&self, beam: usize) -> Vec<usize> {
        let color = self.color_of_beam[beam];
        (0..self.num_beams())
            .filter(|&b| self.color_of_beam[b] == color)
            .collect()
    }

    pub fn effective_bandwidth(&self, bandwidth: f64) -> f64 {
        bandwidth / self.num_colors as f64
    }
}

/// Interference structure induced by a reuse pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ReuseMask {
    /// `interferes[b][b']`: beam b' leaks into beam b.
    pub interferes: Vec<Vec<bool>>,
    pub effective_bandwidth: f64,
}

impl ReuseMask {
    pub fn interfering_pairs(&self) -> usize {
        self.interferes.iter().flatten().filter(|&&x| x).count()
    }
}

pub fn apply_reuse_pattern(scenario: &Scenario) -> ReuseMask {
    let reuse = &scenario.reuse;
    let b = reuse.num_beams();
    ReuseMask {
        interferes: (0..b)
            .map(|to| (0..b).map(|from| reuse.interferes(from, to)).collect())
            .collect(),
        effective_bandwidth: reuse.effective_bandwidth(scenario.bandwidth),
    }
}

/// A fully materialized problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_beams: usize,
    pub num_slots: usize,
    pub max_per_slot: usize,
    pub total_power: f64,
    pub per_beam_power: f64,
    pub bandwidth: f64,
    /// Linear watts.
    pub noise_power: f64,
    pub carrier_frequency: f64,
    pub satellite_height: f64,
    pub satellite_position: [f64; 3],
    pub beams: Vec<BeamGeometry>,
    pub candidates: Vec<Vec<Terminal>>,
    pub reuse: ReusePattern,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        let sys = &config.system;
        let geo = &config.geometry;
        let ant = &config.antenna;
        let b = sys.num_beams;
        if b == 0 || sys.num_slots == 0 || sys.max_per_slot == 0 {
            return Err(Error::InvalidScenario(
                "beam, slot and per-slot counts must be at least 1".into(),
            ));
        }
        if sys.terminals_per_beam < sys.num_slots * sys.max_per_slot {
            return Err(Error::InvalidScenario(format!(
                "{} candidates per beam cannot fill {} slots of {}",
                sys.terminals_per_beam, sys.num_slots, sys.max_per_slot
            )));
        }
        if !(config.traffic.demand_min_bps > 0.0
            && config.traffic.demand_max_bps >= config.traffic.demand_min_bps)
        {
            return Err(Error::InvalidScenario("demand range must be positive".into()));
        }
        if !(geo.beam_radius_m > 0.0 && geo.satellite_height_m > 0.0) {
            return Err(Error::InvalidScenario(
                "beam radius and satellite height must be positive".into(),
            ));
        }

        let cols = (b as f64).sqrt().ceil() as usize;
        let rows = b.div_ceil(cols);
        let centers: Vec<GeoPoint> = match &geo.beam_centers_deg {
            Some(list) => {
                if list.len() != b {
                    return Err(Error::InvalidScenario(format!(
                        "{} beam centers given for {b} beams",
                        list.len()
                    )));
                }
                list.iter().map(|&[lat, lon]| GeoPoint::new(lat, lon)).collect()
            }
            None => {
                let spacing = geo.beam_spacing_m.unwrap_or(3f64.sqrt() * geo.beam_radius_m);
                let origin = GeoPoint::new(geo.cluster_center_lat_deg, geo.cluster_center_lon_deg);
                (0..b)
                    .map(|i| {
                        let (row, col) = (i / cols, i % cols);
                        let east = (col as f64 - (cols as f64 - 1.0) / 2.0) * spacing;
                        let north = ((rows as f64 - 1.0) / 2.0 - row as f64) * spacing;
                        origin.offset(east, north)
                    })
                    .collect()
            }
        };

        let reuse = match &config.reuse.colors {
            Some(colors) => {
                if colors.len() != b {
                    return Err(Error::InvalidScenario(format!(
                        "{} beam colors given for {b} beams",
                        colors.len()
                    )));
                }
                ReusePattern::new(config.reuse.num_colors, colors.clone())?
            }
            None => ReusePattern::grid(config.reuse.num_colors, b, cols)?,
        };

        let satellite = satellite_ecef(geo.satellite_longitude_deg, geo.satellite_height_m);
        let beams = centers
            .iter()
            .enumerate()
            .map(|(i, &center)| {
                let edge = center.offset(0.0, geo.beam_radius_m);
                let edge_angle = off_axis_angle(satellite, center, edge);
                let pattern = BeamPattern::calibrated(
                    ant.boresight_gain_dbi,
                    ant.edge_gain_dbi,
                    edge_angle,
                    ant.min_gain_dbi,
                )?;
                Ok(BeamGeometry {
                    beam_id: i,
                    center,
                    edge_angle_rad: edge_angle,
                    pattern,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let wavelength = SPEED_OF_LIGHT / sys.carrier_frequency_hz;
        let rx_gain = db_to_linear(ant.rx_gain_dbi);
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let candidates = beams
            .iter()
            .map(|beam| {
                (0..sys.terminals_per_beam)
                    .map(|k| {
                        let r = geo.beam_radius_m * rng.random::<f64>().sqrt();
                        let phi = 2.0 * PI * rng.random::<f64>();
                        let position = beam.center.offset(r * phi.sin(), r * phi.cos());
                        let demand_bps = rng.random_range(
                            config.traffic.demand_min_bps..=config.traffic.demand_max_bps,
                        );
                        let distance = slant_distance(satellite, position);
                        let loss = free_space_loss(distance, sys.carrier_frequency_hz);
                        let channel = beams
                            .iter()
                            .map(|feed| {
                                let angle = off_axis_angle(satellite, feed.center, position);
                                channel_coefficient(
                                    feed.pattern.gain_linear(angle),
                                    loss,
                                    rx_gain,
                                    distance,
                                    wavelength,
                                )
                            })
                            .collect();
                        Terminal {
                            beam_id: beam.beam_id,
                            terminal_id: k,
                            position,
                            channel: ChannelVector(channel),
                            demand_bps,
                        }
                    })
                    .collect()
            })
            .collect();

        let per_beam_power = config.effective_beam_power_cap();
        if per_beam_power * b as f64 <= sys.p_tot_watts {
            log::warn!(
                "total power constraint is never binding: {b} x {per_beam_power} W <= {} W",
                sys.p_tot_watts
            );
        }

        let scenario = Self {
            num_beams: b,
            num_slots: sys.num_slots,
            max_per_slot: sys.max_per_slot,
            total_power: sys.p_tot_watts,
            per_beam_power,
            bandwidth: sys.bandwidth_hz,
            noise_power: db_to_linear(sys.noise_power_dbw),
            carrier_frequency: sys.carrier_frequency_hz,
            satellite_height: geo.satellite_height_m,
            satellite_position: satellite,
            beams,
            candidates,
            reuse,
            rng_seed: config.rng_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Checks every structural invariant of a materialized instance.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.num_beams == 0 || self.num_slots == 0 || self.max_per_slot == 0 {
            return bad("beam, slot and per-slot counts must be at least 1".into());
        }
        for (name, v) in [
            ("total power", self.total_power),
            ("per-beam power", self.per_beam_power),
            ("noise power", self.noise_power),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.candidates.len() != self.num_beams || self.reuse.num_beams() != self.num_beams {
            return bad("per-beam tables do not match the beam count".into());
        }
        for (b, pool) in self.candidates.iter().enumerate() {
            if pool.len() < self.num_slots * self.max_per_slot {
                return bad(format!(
                    "beam {b} has {} candidates, needs {}",
                    pool.len(),
                    self.num_slots * self.max_per_slot
                ));
            }
            for t in pool {
                if t.channel.len() != self.num_beams {
                    return bad(format!("terminal ({b},{}) has a short channel", t.terminal_id));
                }
                if !(t.demand_bps > 0.0) {
                    return Err(Error::ZeroDemand(t.demand_bps));
                }
                if t.channel.0.iter().any(|h| !h.re.is_finite() || !h.im.is_finite())
                    || !(t.channel.norm() > 0.0)
                {
                    return bad(format!("terminal ({b},{}) has a degenerate channel", t.terminal_id));
                }
            }
        }
        Ok(())
    }

    pub fn terminal(&self, beam: usize, id: usize) -> &Terminal {
        &self.candidates[beam][id]
    }

    pub fn effective_bandwidth(&self) -> f64 {
        self.reuse.effective_bandwidth(self.bandwidth)
    }

    /// Same instance under a different reuse pattern (checkerboard over the grid).
    pub fn with_colors(&self, num_colors: usize) -> Result<Self> {
        let cols = (self.num_beams as f64).sqrt().ceil() as usize;
        let mut out = self.clone();
        out.reuse = ReusePattern::grid(num_colors, self.num_beams, cols)?;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(doc)?;
        s.validate()?;
        Ok(s)
    }
}
