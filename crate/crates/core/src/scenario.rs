//! Static system description: dimensions, power budgets, layout and the
//! per-link large-scale statistics derived from it.
//!
//! The default layout puts the BS array at the origin along the z-axis and
//! spreads the RISs and users evenly over arcs (250 m and 400 m) spanning
//! ±30° around the y-axis, all at height zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `C0 / d^exponent`, with `C0` given as an attenuation in dB at 1 m.
pub fn path_loss(c0_db: f64, exponent: f64, distance: f64) -> f64 {
    10f64.powf(-c0_db / 10.0) / distance.powf(exponent)
}

/// Large-scale propagation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationModel {
    pub c0_db: f64,
    pub exp_bs_ris: f64,
    pub exp_ris_user: f64,
    pub exp_direct: f64,
    /// Rician factor `kappa = intercept - slope * d`, linear, clamped at zero.
    pub rician_intercept: f64,
    pub rician_slope: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            c0_db: 30.0,
            exp_bs_ris: 2.0,
            exp_ris_user: 2.8,
            exp_direct: 3.5,
            rician_intercept: 13.0,
            rician_slope: 0.03,
        }
    }
}

impl PropagationModel {
    pub fn rician_factor(&self, distance: f64) -> f64 {
        (self.rician_intercept - self.rician_slope * distance).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas.
    pub m: usize,
    /// Users.
    pub k: usize,
    /// RISs. Zero gives the no-RIS baseline.
    pub l: usize,
    pub n1: usize,
    pub n2: usize,
    /// Antenna / element spacings in wavelengths.
    pub d_bs: f64,
    pub d_ris_1: f64,
    pub d_ris_2: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Transmit power budget in watts.
    pub p_max: f64,
    /// Noise power in watts.
    pub sigma2: f64,
    /// Training SNR (linear); `None` tracks `p_max / sigma2`.
    pub rho_p: Option<f64>,
    /// Training sub-phase length in symbols; `None` tracks `k`.
    pub tau_s: Option<f64>,
    /// Coherence block length in symbols.
    pub tau_c: f64,
    /// Per-user powers; `None` means `1/k` each.
    pub power_alloc: Option<Vec<f64>>,
    /// Charge the perfect-CSI curves a single training sub-phase.
    pub perfect_csi_training_loss: bool,
    pub propagation: PropagationModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 60,
            k: 20,
            l: 20,
            n1: 6,
            n2: 10,
            d_bs: 0.5,
            d_ris_1: 0.5,
            d_ris_2: 0.5,
            wavelength: 0.1,
            p_max: 10.0,
            sigma2: dbm_to_watts(-94.0),
            rho_p: None,
            tau_s: None,
            tau_c: 2000.0,
            power_alloc: None,
            perfect_csi_training_loss: false,
            propagation: PropagationModel::default(),
        }
    }
}

impl SystemConfig {
    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }

    /// Transmit SNR `P_max / sigma^2`.
    pub fn rho(&self) -> f64 {
        self.p_max / self.sigma2
    }

    pub fn training_snr(&self) -> f64 {
        self.rho_p.unwrap_or_else(|| self.rho())
    }

    pub fn training_length(&self) -> f64 {
        self.tau_s.unwrap_or(self.k as f64)
    }

    pub fn powers(&self) -> Vec<f64> {
        match &self.power_alloc {
            Some(p) => p.clone(),
            None => vec![1.0 / self.k as f64; self.k],
        }
    }

    /// Sets `N` through a near-square `N1 x N2` factorization.
    pub fn set_elements(&mut self, n: usize) {
        let (n1, n2) = near_square_factors(n);
        self.n1 = n1;
        self.n2 = n2;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.k == 0 || self.n1 == 0 || self.n2 == 0 {
            return bad(format!(
                "dimensions must be at least 1 (M={}, K={}, N1={}, N2={})",
                self.m, self.k, self.n1, self.n2
            ));
        }
        if !(self.p_max > 0.0) {
            return bad(format!("P_max must be positive, got {}", self.p_max));
        }
        if !(self.sigma2 > 0.0) {
            return bad(format!("noise power must be positive, got {}", self.sigma2));
        }
        if !(self.training_snr() > 0.0) {
            return bad(format!("training SNR must be positive, got {}", self.training_snr()));
        }
        let tau_s = self.training_length();
        if !(tau_s > 0.0 && tau_s <= self.tau_c) {
            return bad(format!("need 0 < tau_S <= tau_C, got tau_S={tau_s}, tau_C={}", self.tau_c));
        }
        if !(self.wavelength > 0.0 && self.d_bs > 0.0 && self.d_ris_1 > 0.0 && self.d_ris_2 > 0.0)
        {
            return bad("wavelength and spacings must be positive".into());
        }
        if let Some(p) = &self.power_alloc {
            if p.len() != self.k {
                return bad(format!("power allocation has {} entries for K={}", p.len(), self.k));
            }
            if p.iter().any(|&x| !(x > 0.0)) {
                return bad("all per-user powers must be positive".into());
            }
        }
        Ok(())
    }
}

/// `(n1, n2)` with `n1 <= n2`, `n1 * n2 = n` and `n1` as large as possible.
pub fn near_square_factors(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut n1 = (n as f64).sqrt().floor() as usize;
    while n1 > 1 && n % n1 != 0 {
        n1 -= 1;
    }
    let n1 = n1.max(1);
    (n1, n / n1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArcLayout {
    pub bs_position_m: Point,
    pub ris_radius_m: f64,
    pub user_radius_m: f64,
    pub half_span_deg: f64,
}

impl Default for ArcLayout {
    fn default() -> Self {
        Self {
            bs_position_m: [0.0; 3],
            ris_radius_m: 250.0,
            user_radius_m: 400.0,
            half_span_deg: 30.0,
        }
    }
}

fn arc_points(count: usize, radius: f64, half_span_deg: f64, origin: Point) -> Vec<Point> {
    (0..count)
        .map(|i| {
            let deg = if count == 1 {
                0.0
            } else {
                -half_span_deg + 2.0 * half_span_deg * i as f64 / (count - 1) as f64
            };
            let a = deg.to_radians();
            [origin[0] + radius * a.sin(), origin[1] + radius * a.cos(), 0.0]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub bs_position: Point,
    pub ris_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// Unit normals of the RIS planes.
    pub ris_normals: Vec<Point>,
}

impl Geometry {
    /// RISs and users evenly spaced in angle on their arcs; RISs face the BS.
    pub fn arcs(l: usize, k: usize, layout: &ArcLayout) -> Self {
        let bs = layout.bs_position_m;
        let ris_positions = arc_points(l, layout.ris_radius_m, layout.half_span_deg, bs);
        let user_positions = arc_points(k, layout.user_radius_m, layout.half_span_deg, bs);
        let ris_normals = ris_positions.iter().map(|p| normalize(sub(bs, *p))).collect();
        Self {
            bs_position: bs,
            ris_positions,
            user_positions,
            ris_normals,
        }
    }

    /// Random short-range layout around a BS at the origin: RISs within
    /// 6 m and users within 10 m, all at least 2 m in front of the array.
    /// RISs face back toward the BS axis.
    pub fn scattered(l: usize, k: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pt = |r: f64| [rng.random_range(-r..r), rng.random_range(2.0..r), rng.random_range(-1.0..1.0)];
        let ris_positions: Vec<Point> = (0..l).map(|_| pt(6.0)).collect();
        let user_positions = (0..k).map(|_| pt(10.0)).collect();
        let ris_normals = ris_positions.iter().map(|p| [-p[0], -p[1], 0.0]).collect();
        Self {
            bs_position: [0.0; 3],
            ris_positions,
            user_positions,
            ris_normals,
        }
    }

    /// Position of BS antenna `m` (0-based); the array extends along +z.
    pub fn bs_antenna(&self, cfg: &SystemConfig, m: usize) -> Point {
        let step = m as f64 * cfg.d_bs * cfg.wavelength;
        add(self.bs_position, [0.0, 0.0, step])
    }

    /// In-plane axes `(a1, a2)` of RIS `l`: `a2` is horizontal, `a1 = n x a2`.
    pub fn ris_axes(&self, l: usize) -> (Point, Point) {
        let n = normalize(self.ris_normals[l]);
        let mut a2 = cross([0.0, 0.0, 1.0], n);
        if norm(a2) < 1e-12 {
            a2 = [1.0, 0.0, 0.0];
        }
        let a2 = normalize(a2);
        let a1 = normalize(cross(n, a2));
        (a1, a2)
    }

    /// Position of element `(n1, n2)` (0-based) of RIS `l`; the grid is centered on the RIS.
    pub fn ris_element(&self, cfg: &SystemConfig, l: usize, n1: usize, n2: usize) -> Point {
        let (a1, a2) = self.ris_axes(l);
        let o1 = (n1 as f64 - (cfg.n1 as f64 - 1.0) / 2.0) * cfg.d_ris_1 * cfg.wavelength;
        let o2 = (n2 as f64 - (cfg.n2 as f64 - 1.0) / 2.0) * cfg.d_ris_2 * cfg.wavelength;
        add(self.ris_positions[l], add(scale(a1, o1), scale(a2, o2)))
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn distance(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

fn normalize(a: Point) -> Point {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        a
    }
}

/// Per-link path losses, Rician factors and departure angles.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStats {
    /// BS-RIS path loss, per RIS.
    pub beta_bs_ris: Vec<f64>,
    /// BS-user path loss, per user.
    pub beta_direct: Vec<f64>,
    /// RIS-user path loss, `[l][k]`.
    pub beta_ris_user: Vec<Vec<f64>>,
    pub kappa_direct: Vec<f64>,
    pub kappa_ris_user: Vec<Vec<f64>>,
    /// Departure angle from the BS array axis, per user.
    pub aod_direct: Vec<f64>,
    /// Departure angle from the horizontal RIS grid axis, `[l][k]`.
    pub aod_ris_user: Vec<Vec<f64>>,
}

impl LinkStats {
    /// NLoS power `beta / (kappa + 1)` of the direct link.
    pub fn nlos_direct(&self, k: usize) -> f64 {
        self.beta_direct[k] / (self.kappa_direct[k] + 1.0)
    }

    pub fn nlos_ris_user(&self, l: usize, k: usize) -> f64 {
        self.beta_ris_user[l][k] / (self.kappa_ris_user[l][k] + 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: SystemConfig,
    geometry: Geometry,
    stats: LinkStats,
}

impl Scenario {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }
}

/// Validates the inputs and derives every link statistic. Pure.
pub fn build_scenario(config: SystemConfig, geometry: Geometry) -> Result<Scenario> {
    config.validate()?;
    let geo_err = |msg: String| Err(Error::InvalidGeometry(msg));
    if geometry.ris_positions.len() != config.l || geometry.ris_normals.len() != config.l {
        return geo_err(format!(
            "expected {} RIS positions and normals, got {} and {}",
            config.l,
            geometry.ris_positions.len(),
            geometry.ris_normals.len()
        ));
    }
    if geometry.user_positions.len() != config.k {
        return geo_err(format!(
            "expected {} user positions, got {}",
            config.k,
            geometry.user_positions.len()
        ));
    }
    if geometry.ris_normals.iter().any(|n| !(norm(*n) > 0.0)) {
        return geo_err("RIS normals must be non-zero".into());
    }

    let prop = &config.propagation;
    let bs = geometry.bs_position;
    let positive = |d: f64, what: &str| -> Result<f64> {
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::InvalidGeometry(format!("{what} distance is {d}")))
        }
    };

    let mut beta_bs_ris = Vec::with_capacity(config.l);
    for (l, &p) in geometry.ris_positions.iter().enumerate() {
        let d = positive(distance(bs, p), &format!("BS-RIS {l}"))?;
        beta_bs_ris.push(path_loss(prop.c0_db, prop.exp_bs_ris, d));
    }

    let mut beta_direct = Vec::with_capacity(config.k);
    let mut kappa_direct = Vec::with_capacity(config.k);
    let mut aod_direct = Vec::with_capacity(config.k);
    for (k, &u) in geometry.user_positions.iter().enumerate() {
        let v = sub(u, bs);
        let d = positive(norm(v), &format!("BS-user {k}"))?;
        beta_direct.push(path_loss(prop.c0_db, prop.exp_direct, d));
        kappa_direct.push(prop.rician_factor(d));
        aod_direct.push((v[2] / d).clamp(-1.0, 1.0).acos());
    }

    let mut beta_ris_user = vec![Vec::with_capacity(config.k); config.l];
    let mut kappa_ris_user = vec![Vec::with_capacity(config.k); config.l];
    let mut aod_ris_user = vec![Vec::with_capacity(config.k); config.l];
    for l in 0..config.l {
        let (_, axis) = geometry.ris_axes(l);
        for (k, &u) in geometry.user_positions.iter().enumerate() {
            let v = sub(u, geometry.ris_positions[l]);
            let d = positive(norm(v), &format!("RIS {l} - user {k}"))?;
            beta_ris_user[l].push(path_loss(prop.c0_db, prop.exp_ris_user, d));
            kappa_ris_user[l].push(prop.rician_factor(d));
            aod_ris_user[l].push((dot(v, axis) / d).clamp(-1.0, 1.0).acos());
        }
    }

    Ok(Scenario {
        stats: LinkStats {
            beta_bs_ris,
            beta_direct,
            beta_ris_user,
            kappa_direct,
            kappa_ris_user,
            aod_direct,
            aod_ris_user,
        },
        config,
        geometry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            _ => Err(Error::UnknownFigure(s.to_string())),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
        })
    }
}

/// How the layout is produced; arcs are regenerated when `L` or `K` change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "lowercase")]
pub enum GeometrySpec {
    Arcs(ArcLayout),
    Explicit(Geometry),
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Arcs(ArcLayout::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub config: SystemConfig,
    pub geometry: GeometrySpec,
}

impl ScenarioTemplate {
    pub fn figure(figure: FigureId) -> Self {
        let mut config = SystemConfig::default();
        if figure == FigureId::Fig4 {
            // The fig4 no-RIS reference lines sit at the P_max = 6 W points of fig3.
            config.p_max = 6.0;
            config.set_elements(100);
        }
        Self {
            config,
            geometry: GeometrySpec::default(),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let geometry = match &self.geometry {
            GeometrySpec::Arcs(layout) => Geometry::arcs(self.config.l, self.config.k, layout),
            GeometrySpec::Explicit(g) => g.clone(),
        };
        build_scenario(self.config.clone(), geometry)
    }
}

/// Field overrides applied on top of a template.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub n: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub p_max_w: Option<f64>,
    pub sigma2_w: Option<f64>,
    pub rho_p: Option<f64>,
    pub tau_s_symbols: Option<f64>,
    pub tau_c_symbols: Option<f64>,
}

impl Overrides {
    /// Parses one `key=value` assignment (CLI form). Power keys accept a
    /// `_dbm` / `_db` suffix in place of the linear unit.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got `{assignment}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let int = || -> Result<usize> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{key}` needs an integer, got `{value}`")))
        };
        let real = || -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("`{key}` needs a number, got `{value}`")))
        };
        match key.as_str() {
            "m" => self.m = Some(int()?),
            "k" => self.k = Some(int()?),
            "l" => self.l = Some(int()?),
            "n" => self.n = Some(int()?),
            "n1" => self.n1 = Some(int()?),
            "n2" => self.n2 = Some(int()?),
            "p_max_w" => self.p_max_w = Some(real()?),
            "p_max_dbm" => self.p_max_w = Some(dbm_to_watts(real()?)),
            "sigma2_w" => self.sigma2_w = Some(real()?),
            "sigma2_dbm" => self.sigma2_w = Some(dbm_to_watts(real()?)),
            "rho_p" => self.rho_p = Some(real()?),
            "rho_p_db" => self.rho_p = Some(db_to_linear(real()?)),
            "tau_s" | "tau_s_symbols" => self.tau_s_symbols = Some(real()?),
            "tau_c" | "tau_c_symbols" => self.tau_c_symbols = Some(real()?),
            _ => return Err(Error::InvalidArgument(format!("unknown override key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply(&self, config: &mut SystemConfig) {
        if let Some(v) = self.m {
            config.m = v;
        }
        if let Some(v) = self.k {
            config.k = v;
        }
        if let Some(v) = self.l {
            config.l = v;
        }
        if let Some(v) = self.n {
            config.set_elements(v);
        }
        if let Some(v) = self.n1 {
            config.n1 = v;
        }
        if let Some(v) = self.n2 {
            config.n2 = v;
        }
        if let Some(v) = self.p_max_w {
            config.p_max = v;
        }
        if let Some(v) = self.sigma2_w {
            config.sigma2 = v;
        }
        if let Some(v) = self.rho_p {
            config.rho_p = Some(v);
        }
        if let Some(v) = self.tau_s_symbols {
            config.tau_s = Some(v);
        }
        if let Some(v) = self.tau_c_symbols {
            config.tau_c = v;
        }
    }
}

/// Scenario of one of the figure setups with `overrides` applied.
pub fn default_figure_scenario(figure: FigureId, overrides: &Overrides) -> Result<Scenario> {
    let mut template = ScenarioTemplate::figure(figure);
    overrides.apply(&mut template.config);
    template.build()
}

/// On-disk scenario description. Every field is optional and defaults to the
/// fig2 setup; power-like quantities take exactly one of their unit variants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub n: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub d_bs: Option<f64>,
    pub d_ris_1: Option<f64>,
    pub d_ris_2: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub p_max_w: Option<f64>,
    pub p_max_dbm: Option<f64>,
    pub sigma2_w: Option<f64>,
    pub sigma2_dbm: Option<f64>,
    pub rho_p: Option<f64>,
    pub rho_p_db: Option<f64>,
    pub tau_s_symbols: Option<f64>,
    pub tau_c_symbols: Option<f64>,
    pub power_alloc_w: Option<Vec<f64>>,
    pub perfect_csi_training_loss: Option<bool>,
    pub propagation: Option<PropagationModel>,
    pub geometry: Option<GeometrySpec>,
}

fn one_of(name: &str, linear: Option<f64>, log: Option<f64>, to_linear: fn(f64) -> f64) -> Result<Option<f64>> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(format!(
            "`{name}` given in both linear and logarithmic units"
        ))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(to_linear(v))),
        (None, None) => Ok(None),
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Layers `overrides` on top of the file; an override replaces every
    /// unit variant of its field.
    pub fn apply_overrides(&mut self, o: &Overrides) {
        let set = |dst: &mut Option<usize>, v: Option<usize>| {
            if v.is_some() {
                *dst = v;
            }
        };
        set(&mut self.m, o.m);
        set(&mut self.k, o.k);
        set(&mut self.l, o.l);
        if o.n.is_some() {
            self.n = o.n;
            self.n1 = None;
            self.n2 = None;
        }
        if o.n1.is_some() || o.n2.is_some() {
            if let Some((n1, n2)) = self.n.take().map(near_square_factors) {
                self.n1.get_or_insert(n1);
                self.n2.get_or_insert(n2);
            }
            set(&mut self.n1, o.n1);
            set(&mut self.n2, o.n2);
        }
        if let Some(v) = o.p_max_w {
            self.p_max_w = Some(v);
            self.p_max_dbm = None;
        }
        if let Some(v) = o.sigma2_w {
            self.sigma2_w = Some(v);
            self.sigma2_dbm = None;
        }
        if let Some(v) = o.rho_p {
            self.rho_p = Some(v);
            self.rho_p_db = None;
        }
        if o.tau_s_symbols.is_some() {
            self.tau_s_symbols = o.tau_s_symbols;
        }
        if o.tau_c_symbols.is_some() {
            self.tau_c_symbols = o.tau_c_symbols;
        }
    }

    pub fn to_template(&self) -> Result<ScenarioTemplate> {
        let mut config = SystemConfig::default();
        if self.n.is_some() && (self.n1.is_some() || self.n2.is_some()) {
            return Err(Error::InvalidConfig("give either `n` or `n1`/`n2`, not both".into()));
        }
        let overrides = Overrides {
            m: self.m,
            k: self.k,
            l: self.l,
            n: self.n,
            n1: self.n1,
            n2: self.n2,
            p_max_w: one_of("p_max", self.p_max_w, self.p_max_dbm, dbm_to_watts)?,
            sigma2_w: one_of("sigma2", self.sigma2_w, self.sigma2_dbm, dbm_to_watts)?,
            rho_p: one_of("rho_p", self.rho_p, self.rho_p_db, db_to_linear)?,
            tau_s_symbols: self.tau_s_symbols,
            tau_c_symbols: self.tau_c_symbols,
        };
        overrides.apply(&mut config);
        if let Some(v) = self.d_bs {
            config.d_bs = v;
        }
        if let Some(v) = self.d_ris_1 {
            config.d_ris_1 = v;
        }
        if let Some(v) = self.d_ris_2 {
            config.d_ris_2 = v;
        }
        if let Some(v) = self.wavelength_m {
            config.wavelength = v;
        }
        if let Some(p) = &self.power_alloc_w {
            config.power_alloc = Some(p.clone());
        }
        if let Some(v) = self.perfect_csi_training_loss {
            config.perfect_csi_training_loss = v;
        }
        if let Some(p) = &self.propagation {
            config.propagation = p.clone();
        }
        Ok(ScenarioTemplate {
            config,
            geometry: self.geometry.clone().unwrap_or_default(),
        })
    }
}
