//! Route, infrastructure, task and participant variables, plus the three
//! behavioral metrics derived from 10 Hz trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::Network;
use crate::routeset::Route;

/// Minimum heading change (degrees) that counts as a turn.
pub const TURN_THRESHOLD_DEG: f64 = 90.0;
const ANGLE_EPS: f64 = 1e-9;

/// Route, infrastructure and task variables. Distances in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub distot: f64,
    pub dist_firstturn: f64,
    pub dist_avg_straight: f64,
    pub dist_longeststretch: f64,
    pub turns_tot: f64,
    pub turns_left: f64,
    pub turns_right: f64,
    pub rot_abs: f64,
    pub ratio_wide: f64,
    pub window: f64,
    pub firedoor: f64,
    pub floorsigns: f64,
    pub level_no: f64,
    pub stairs_no: f64,
    pub task_1: f64,
    pub task_2: f64,
    pub task_3: f64,
    pub task_4: f64,
}

impl FeatureVector {
    pub const NAMES: [&'static str; 18] = [
        "distot",
        "dist_firstturn",
        "dist_avg_straight",
        "dist_longeststretch",
        "turns_tot",
        "turns_left",
        "turns_right",
        "rot_abs",
        "ratio_wide",
        "window",
        "firedoor",
        "floorsigns",
        "level_no",
        "stairs_no",
        "task_1",
        "task_2",
        "task_3",
        "task_4",
    ];

    /// Variables measured in centimeters.
    pub const DISTANCES: [&'static str; 4] = [
        "distot",
        "dist_firstturn",
        "dist_avg_straight",
        "dist_longeststretch",
    ];

    pub fn values(&self) -> [f64; 18] {
        [
            self.distot,
            self.dist_firstturn,
            self.dist_avg_straight,
            self.dist_longeststretch,
            self.turns_tot,
            self.turns_left,
            self.turns_right,
            self.rot_abs,
            self.ratio_wide,
            self.window,
            self.firedoor,
            self.floorsigns,
            self.level_no,
            self.stairs_no,
            self.task_1,
            self.task_2,
            self.task_3,
            self.task_4,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values()[i])
    }

    pub fn is_variable(name: &str) -> bool {
        Self::NAMES.contains(&name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    Secondary,
    Bachelor,
    Master,
    Doctorate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VrExperience {
    Often,
    Sometimes,
    Never,
}

/// Recorded participant attributes; binary indicators are derived so the
/// mutually exclusive groups stay exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub age: f64,
    pub male: bool,
    pub education: Education,
    pub familiar: bool,
    pub gaming_often: bool,
    pub vr: VrExperience,
    pub orientation_good: bool,
    pub height_cm: f64,
}

impl Default for ParticipantProfile {
    fn default() -> Self {
        Self {
            age: 28.0,
            male: true,
            education: Education::Master,
            familiar: true,
            gaming_often: false,
            vr: VrExperience::Sometimes,
            orientation_good: true,
            height_cm: 175.0,
        }
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl ParticipantProfile {
    pub const NAMES: [&'static str; 18] = [
        "age",
        "age_young",
        "age_old",
        "gender",
        "height",
        "education_Sec",
        "education_BSc",
        "education_MSc",
        "education_Doc",
        "familiar",
        "familiar_not",
        "gaming_often",
        "gaming_not",
        "VR_often",
        "VR_sometimes",
        "VR_never",
        "orientation_good",
        "orientation_bad",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        let v = match name {
            "age" => self.age,
            "age_young" => ind(self.age < 25.0),
            "age_old" => ind(self.age > 50.0),
            "gender" => ind(self.male),
            "height" => self.height_cm,
            "education_Sec" => ind(self.education == Education::Secondary),
            "education_BSc" => ind(self.education == Education::Bachelor),
            "education_MSc" => ind(self.education == Education::Master),
            "education_Doc" => ind(self.education == Education::Doctorate),
            "familiar" => ind(self.familiar),
            "familiar_not" => ind(!self.familiar),
            "gaming_often" => ind(self.gaming_often),
            "gaming_not" => ind(!self.gaming_often),
            "VR_often" => ind(self.vr == VrExperience::Often),
            "VR_sometimes" => ind(self.vr == VrExperience::Sometimes),
            "VR_never" => ind(self.vr == VrExperience::Never),
            "orientation_good" => ind(self.orientation_good),
            "orientation_bad" => ind(!self.orientation_good),
            _ => return None,
        };
        Some(v)
    }

    pub fn values(&self) -> Vec<f64> {
        Self::NAMES.iter().map(|n| self.get(n).unwrap()).collect()
    }

    pub fn is_variable(name: &str) -> bool {
        Self::NAMES.contains(&name)
    }
}

/// Turn statistics of a route.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TurnSummary {
    pub turns_tot: u32,
    pub turns_left: u32,
    pub turns_right: u32,
    pub rot_abs: f64,
}

/// Signed heading change from `a` to `b` in degrees, in (-180, 180].
/// Positive is counter-clockwise (a left turn with y pointing north).
pub fn heading_change(a: (f64, f64), b: (f64, f64)) -> f64 {
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    let deg = cross.atan2(dot).to_degrees();
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

enum Step {
    /// Horizontal link with a planar direction.
    Walk((f64, f64)),
    /// Horizontal link without planar extent.
    Still,
    Stair,
}

fn steps(route: &Route, network: &Network) -> Result<Vec<(Step, f64)>> {
    route
        .links
        .iter()
        .map(|id| {
            let li = network.link_idx(id)?;
            let link = &network.links()[li];
            let (f, t) = network.link_endpoints(li);
            let (a, b) = (&network.nodes()[f], &network.nodes()[t]);
            let dir = (b.x - a.x, b.y - a.y);
            let step = if link.is_stair {
                Step::Stair
            } else if dir.0.hypot(dir.1) < 1e-12 {
                Step::Still
            } else {
                Step::Walk(dir)
            };
            Ok((step, link.length_cm))
        })
        .collect()
}

/// Per-link annotation: whether a counted turn precedes the link, and its
/// signed angle.
fn annotate_turns(steps: &[(Step, f64)]) -> Vec<Option<f64>> {
    let mut prev: Option<(f64, f64)> = None;
    steps
        .iter()
        .map(|(step, _)| match step {
            Step::Stair => {
                prev = None;
                None
            }
            Step::Still => None,
            Step::Walk(dir) => {
                let turn = prev.and_then(|p| {
                    let theta = heading_change(p, *dir);
                    (theta.abs() >= TURN_THRESHOLD_DEG - ANGLE_EPS).then_some(theta)
                });
                prev = Some(*dir);
                turn
            }
        })
        .collect()
}

/// Counts turns of at least 90 degrees between consecutive horizontal links.
/// Heading changes across a stair link are not turns. Reversals (180
/// degrees) count toward the total and `rot_abs` but are neither left nor
/// right.
pub fn count_turns(route: &Route, network: &Network) -> Result<TurnSummary> {
    let steps = steps(route, network)?;
    let mut s = TurnSummary::default();
    for theta in annotate_turns(&steps).into_iter().flatten() {
        s.turns_tot += 1;
        s.rot_abs += theta.abs();
        if theta.abs() < 180.0 - ANGLE_EPS {
            if theta > 0.0 {
                s.turns_left += 1;
            } else {
                s.turns_right += 1;
            }
        }
    }
    Ok(s)
}

/// Computes every route, infrastructure and task variable for `route`.
pub fn route_features(route: &Route, network: &Network, task: u32) -> Result<FeatureVector> {
    let steps = steps(route, network)?;
    if steps.is_empty() {
        return Err(Error::InvalidRoute("route has no links".into()));
    }
    let turns = annotate_turns(&steps);
    let summary = count_turns(route, network)?;

    let distot: f64 = steps.iter().map(|(_, w)| w).sum();

    let mut stretches: Vec<f64> = Vec::new();
    let mut first_turn: Option<f64> = None;
    let mut walked = 0.0;
    for (i, ((step, w), turn)) in steps.iter().zip(&turns).enumerate() {
        if turn.is_some() && first_turn.is_none() {
            first_turn = Some(walked);
        }
        let is_stair = matches!(step, Step::Stair);
        let boundary =
            i == 0 || turn.is_some() || is_stair != matches!(steps[i - 1].0, Step::Stair);
        if boundary {
            stretches.push(*w);
        } else {
            *stretches.last_mut().unwrap() += w;
        }
        walked += w;
    }
    let longest = stretches.iter().copied().fold(0.0, f64::max);

    let mut wide = 0.0;
    let mut window = 0.0;
    let mut firedoor = 0;
    let mut floorsigns = 0;
    let mut stairs = 0;
    let mut floors = Vec::with_capacity(route.links.len() + 1);
    for id in &route.links {
        let li = network.link_idx(id)?;
        let link = &network.links()[li];
        let (f, t) = network.link_endpoints(li);
        if floors.is_empty() {
            floors.push(network.nodes()[f].floor);
        }
        floors.push(network.nodes()[t].floor);
        if link.is_wide {
            wide += link.length_cm;
        }
        if link.has_window {
            window += link.length_cm;
        }
        firedoor += link.firedoor_count;
        floorsigns += link.floorsign_count;
        stairs += u32::from(link.is_stair);
    }
    floors.dedup();

    Ok(FeatureVector {
        distot,
        dist_firstturn: first_turn.unwrap_or(distot),
        dist_avg_straight: distot / stretches.len() as f64,
        dist_longeststretch: longest,
        turns_tot: summary.turns_tot as f64,
        turns_left: summary.turns_left as f64,
        turns_right: summary.turns_right as f64,
        rot_abs: summary.rot_abs,
        ratio_wide: wide / distot,
        window: window / distot,
        firedoor: firedoor as f64,
        floorsigns: floorsigns as f64,
        level_no: floors.len() as f64,
        stairs_no: stairs as f64,
        task_1: ind(task == 1),
        task_2: ind(task == 2),
        task_3: ind(task == 3),
        task_4: ind(task == 4),
    })
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_s: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub floor: i32,
    pub yaw_deg: f64,
}

/// Timestamped position and head-yaw samples, nominally at 10 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Trajectory("at least two samples required".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t_s > w[0].t_s) {
                return Err(Error::Trajectory(format!(
                    "non-monotone timestamps at sample {}: {} then {}",
                    i + 1,
                    w[0].t_s,
                    w[1].t_s
                )));
            }
        }
        if let Some(s) = samples
            .iter()
            .find(|s| !(s.yaw_deg >= 0.0 && s.yaw_deg < 360.0))
        {
            return Err(Error::Trajectory(format!(
                "yaw {} outside [0, 360) at t = {}",
                s.yaw_deg, s.t_s
            )));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let samples = rdr
            .deserialize::<Sample>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(samples)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_s,x_m,y_m,floor,yaw_deg\n");
        for p in &self.samples {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                p.t_s, p.x_m, p.y_m, p.floor, p.yaw_deg
            ));
        }
        s
    }

    fn step_speeds(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.samples.windows(2).map(|w| {
            let d = (w[1].x_m - w[0].x_m).hypot(w[1].y_m - w[0].y_m);
            (w[0].t_s, w[1].t_s, d / (w[1].t_s - w[0].t_s))
        })
    }
}

/// Thresholds defining a hesitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseRule {
    /// Steps slower than this are stationary.
    pub v_pause_mps: f64,
    /// A stationary interval counts only if strictly longer than this.
    pub min_duration_s: f64,
}

impl Default for PauseRule {
    fn default() -> Self {
        Self {
            v_pause_mps: 0.1,
            min_duration_s: 3.0,
        }
    }
}

/// Number of maximal stationary intervals lasting longer than the rule's
/// minimum duration.
pub fn detect_hesitations(traj: &Trajectory, rule: PauseRule) -> usize {
    let mut count = 0;
    let mut run: Option<(f64, f64)> = None;
    let close = |run: Option<(f64, f64)>| match run {
        Some((a, b)) if b - a > rule.min_duration_s + 1e-9 => 1,
        _ => 0,
    };
    for (t0, t1, v) in traj.step_speeds() {
        if v < rule.v_pause_mps {
            run = Some(run.map_or((t0, t1), |(a, _)| (a, t1)));
        } else {
            count += close(run.take());
        }
    }
    count + close(run)
}

/// Wraps an angle difference into (-180, 180].
pub fn wrap_degrees(d: f64) -> f64 {
    let mut d = d % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Mean absolute yaw rate in degrees per second.
pub fn head_rotation(traj: &Trajectory) -> f64 {
    let s = traj.samples();
    let total: f64 = s
        .windows(2)
        .map(|w| wrap_degrees(w[1].yaw_deg - w[0].yaw_deg).abs() / (w[1].t_s - w[0].t_s))
        .sum();
    total / (s.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    pub total_time_s: f64,
    pub total_distance_m: f64,
    pub avg_speed_mps: f64,
}

pub fn wayfinding_performance(traj: &Trajectory) -> Result<Performance> {
    let s = traj.samples();
    let total_time_s = s[s.len() - 1].t_s - s[0].t_s;
    if total_time_s <= 0.0 {
        return Err(Error::Trajectory("zero duration".into()));
    }
    let total_distance_m: f64 = s
        .windows(2)
        .map(|w| (w[1].x_m - w[0].x_m).hypot(w[1].y_m - w[0].y_m))
        .sum();
    Ok(Performance {
        total_time_s,
        total_distance_m,
        avg_speed_mps: total_distance_m / total_time_s,
    })
}

/// All behavioral metrics of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMetrics {
    pub total_time_s: f64,
    pub total_distance_m: f64,
    pub avg_speed_mps: f64,
    pub hesitations: f64,
    pub head_rotation_dps: f64,
}

impl BehaviorMetrics {
    pub const NAMES: [&'static str; 5] = [
        "total_time_s",
        "total_distance_m",
        "avg_speed_mps",
        "hesitations",
        "head_rotation_dps",
    ];

    pub fn derive(traj: &Trajectory, rule: PauseRule) -> Result<Self> {
        let p = wayfinding_performance(traj)?;
        Ok(Self {
            total_time_s: p.total_time_s,
            total_distance_m: p.total_distance_m,
            avg_speed_mps: p.avg_speed_mps,
            hesitations: detect_hesitations(traj, rule) as f64,
            head_rotation_dps: head_rotation(traj),
        })
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.total_time_s,
            self.total_distance_m,
            self.avg_speed_mps,
            self.hesitations,
            self.head_rotation_dps,
        ]
    }
}

// ---------------------------------------------------------------------------
// Tabular output

/// One chosen route of one participant in one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub participant: u32,
    pub task: u32,
    pub route: Vec<String>,
    pub profile: ParticipantProfile,
}

/// Numeric table with named columns, keyed by (participant, task).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NumericTable {
    pub columns: Vec<String>,
    pub keys: Vec<(u32, u32)>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("participant,task");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for ((p, t), row) in self.keys.iter().zip(&self.rows) {
            s.push_str(&format!("{p},{t}"));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    /// Parses a CSV whose first two columns are `participant,task`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "participant" || &header[1] != "task" {
            return Err(Error::Parse(
                "table must start with `participant,task` columns".into(),
            ));
        }
        let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut table = NumericTable {
            columns,
            ..Default::default()
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|e| {
                    Error::Parse(format!(
                        "line {}, column `{}`: {e}",
                        line + 2,
                        header.get(i).unwrap_or("?")
                    ))
                })
            };
            table.keys.push((parse(0)? as u32, parse(1)? as u32));
            table
                .rows
                .push((2..rec.len()).map(parse).collect::<Result<Vec<_>>>()?);
        }
        Ok(table)
    }

    /// Inner join on (participant, task), keeping this table's row order.
    pub fn join(&self, other: &NumericTable) -> Result<NumericTable> {
        let mut out = NumericTable {
            columns: self
                .columns
                .iter()
                .chain(other.columns.iter())
                .cloned()
                .collect(),
            ..Default::default()
        };
        for (k, row) in self.keys.iter().zip(&self.rows) {
            if let Some(j) = other.keys.iter().position(|o| o == k) {
                out.keys.push(*k);
                out.rows
                    .push(row.iter().chain(other.rows[j].iter()).copied().collect());
            }
        }
        if out.rows.is_empty() {
            return Err(Error::EmptyInput("join produced no rows"));
        }
        Ok(out)
    }
}

/// Feature table for chosen routes: route variables followed by participant
/// variables.
pub fn feature_table(network: &Network, trips: &[Trip]) -> Result<NumericTable> {
    let mut table = NumericTable {
        columns: FeatureVector::NAMES
            .iter()
            .chain(ParticipantProfile::NAMES.iter())
            .map(|s| s.to_string())
            .collect(),
        ..Default::default()
    };
    for trip in trips {
        let route = Route::from_ids(network, &trip.route)?;
        let fv = route_features(&route, network, trip.task)?;
        let mut row = fv.values().to_vec();
        row.extend(trip.profile.values());
        table.keys.push((trip.participant, trip.task));
        table.rows.push(row);
    }
    Ok(table)
}
