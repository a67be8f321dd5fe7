//! Problem data: instance type, file format, and the benchmark generator.
//!
//! Nodes are indexed `0..=n` with `0` the depot; periods are `1..=tau` in
//! the formulation and `0..tau` in code (accessors take the code index).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance when cross-checking an explicit distance matrix
/// against Euclidean distances from coordinates.
pub const COORD_DISTANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{field} must be positive (got {value})")]
    NotPositive { field: String, value: f64 },
    #[error("negative parameter at `{field}` (got {value})")]
    Negative { field: String, value: f64 },
    #[error("non-finite parameter at `{field}`")]
    NonFinite { field: String },
    #[error("dimension mismatch at `{field}`: expected {expected}, got {got}")]
    Dimension {
        field: String,
        expected: usize,
        got: usize,
    },
    #[error("missing both `coordinates` and `distances`")]
    MissingGeometry,
    #[error("distance/coordinate mismatch at d[{i}][{j}]: matrix {given}, Euclidean {computed}")]
    DistanceMismatch {
        i: usize,
        j: usize,
        given: f64,
        computed: f64,
    },
    #[error("nonzero diagonal at d[{i}][{i}]")]
    NonzeroDiagonal { i: usize },
    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),
    #[error("unsupported parameter combination: {0}")]
    UnsupportedCombination(String),
}

/// A SPIRP instance over nodes `0..=n` (0 = depot) and `tau` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    /// Number of collection nodes (depot excluded).
    pub n: usize,
    /// Number of periods in the cyclic horizon.
    pub tau: usize,
    /// Vehicle capacity Q in liters.
    pub capacity: f64,
    /// Traveling cost c per distance unit.
    pub traveling_cost: f64,
    /// Cost v per vehicle per period.
    pub vehicle_cost: f64,
    /// Holding cost h per liter per period at the depot.
    pub holding_cost: f64,
    /// Purchase cost p per liter of virgin oil.
    pub purchase_cost: f64,
    /// Depot requirement r[t] in liters, length `tau`.
    pub requirements: Vec<f64>,
    /// Accumulation a[i][t] in liters for node i+1 (n rows of length `tau`;
    /// the depot accumulates nothing).
    pub accumulation: Vec<Vec<f64>>,
    /// Optional node coordinates, length `n + 1`, index 0 = depot.
    pub coordinates: Option<Vec<[f64; 2]>>,
    /// Row-major (n+1) x (n+1) distance matrix.
    distances: Vec<f64>,
    /// Whether the source file carried an explicit matrix (vs. derived).
    explicit_distances: bool,
}

/// On-disk schema; see the file-format section of the README.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    name: String,
    n: usize,
    tau: usize,
    capacity: f64,
    traveling_cost: f64,
    vehicle_cost: f64,
    holding_cost: f64,
    purchase_cost: f64,
    requirements: Vec<f64>,
    accumulation: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coordinates: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distances: Option<Vec<Vec<f64>>>,
}

impl Instance {
    /// Parses and validates an instance file.
    pub fn parse(text: &str) -> Result<Instance, InstanceError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: InstanceFile =
            serde_path_to_error::deserialize(de).map_err(|e| InstanceError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Instance::from_file(file)
    }

    /// Serializes to the instance file format. `parse(serialize(x)) == x`
    /// bit-exactly for every field.
    pub fn serialize(&self) -> String {
        let m = self.n + 1;
        let file = InstanceFile {
            name: self.name.clone(),
            n: self.n,
            tau: self.tau,
            capacity: self.capacity,
            traveling_cost: self.traveling_cost,
            vehicle_cost: self.vehicle_cost,
            holding_cost: self.holding_cost,
            purchase_cost: self.purchase_cost,
            requirements: self.requirements.clone(),
            accumulation: self.accumulation.clone(),
            coordinates: self.coordinates.clone(),
            distances: self.explicit_distances.then(|| {
                (0..m)
                    .map(|i| self.distances[i * m..(i + 1) * m].to_vec())
                    .collect()
            }),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("instance serializes");
        out.push('\n');
        out
    }

    fn from_file(file: InstanceFile) -> Result<Instance, InstanceError> {
        let positive = |field: &str, value: f64| {
            if !value.is_finite() {
                Err(InstanceError::NonFinite { field: field.into() })
            } else if value <= 0.0 {
                Err(InstanceError::NotPositive { field: field.into(), value })
            } else {
                Ok(())
            }
        };
        let nonneg = |field: String, value: f64| {
            if !value.is_finite() {
                Err(InstanceError::NonFinite { field })
            } else if value < 0.0 {
                Err(InstanceError::Negative { field, value })
            } else {
                Ok(())
            }
        };

        if file.n == 0 {
            return Err(InstanceError::NotPositive { field: "n".into(), value: 0.0 });
        }
        if file.tau == 0 {
            return Err(InstanceError::NotPositive { field: "tau".into(), value: 0.0 });
        }
        positive("capacity", file.capacity)?;
        nonneg("traveling_cost".into(), file.traveling_cost)?;
        nonneg("vehicle_cost".into(), file.vehicle_cost)?;
        nonneg("holding_cost".into(), file.holding_cost)?;
        nonneg("purchase_cost".into(), file.purchase_cost)?;

        if file.requirements.len() != file.tau {
            return Err(InstanceError::Dimension {
                field: "requirements".into(),
                expected: file.tau,
                got: file.requirements.len(),
            });
        }
        for (t, &r) in file.requirements.iter().enumerate() {
            nonneg(format!("requirements[{t}]"), r)?;
        }
        if file.accumulation.len() != file.n {
            return Err(InstanceError::Dimension {
                field: "accumulation".into(),
                expected: file.n,
                got: file.accumulation.len(),
            });
        }
        for (i, row) in file.accumulation.iter().enumerate() {
            if row.len() != file.tau {
                return Err(InstanceError::Dimension {
                    field: format!("accumulation[{i}]"),
                    expected: file.tau,
                    got: row.len(),
                });
            }
            for (t, &a) in row.iter().enumerate() {
                nonneg(format!("accumulation[{i}][{t}]"), a)?;
            }
        }

        let m = file.n + 1;
        if let Some(coords) = &file.coordinates {
            if coords.len() != m {
                return Err(InstanceError::Dimension {
                    field: "coordinates".into(),
                    expected: m,
                    got: coords.len(),
                });
            }
            for (i, c) in coords.iter().enumerate() {
                if !c[0].is_finite() || !c[1].is_finite() {
                    return Err(InstanceError::NonFinite { field: format!("coordinates[{i}]") });
                }
            }
        }
        let explicit = match &file.distances {
            Some(rows) => {
                if rows.len() != m {
                    return Err(InstanceError::Dimension {
                        field: "distances".into(),
                        expected: m,
                        got: rows.len(),
                    });
                }
                let mut flat = Vec::with_capacity(m * m);
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != m {
                        return Err(InstanceError::Dimension {
                            field: format!("distances[{i}]"),
                            expected: m,
                            got: row.len(),
                        });
                    }
                    for (j, &d) in row.iter().enumerate() {
                        nonneg(format!("distances[{i}][{j}]"), d)?;
                        if i == j && d != 0.0 {
                            return Err(InstanceError::NonzeroDiagonal { i });
                        }
                        flat.push(d);
                    }
                }
                Some(flat)
            }
            None => None,
        };

        let distances = match (&file.coordinates, explicit) {
            (Some(coords), explicit) => {
                let derived = euclidean_matrix(coords);
                if let Some(given) = explicit {
                    for i in 0..m {
                        for j in 0..m {
                            let (g, e) = (given[i * m + j], derived[i * m + j]);
                            if (g - e).abs() > COORD_DISTANCE_TOL {
                                return Err(InstanceError::DistanceMismatch {
                                    i,
                                    j,
                                    given: g,
                                    computed: e,
                                });
                            }
                        }
                    }
                    given
                } else {
                    derived
                }
            }
            (None, Some(given)) => given,
            (None, None) => return Err(InstanceError::MissingGeometry),
        };

        Ok(Instance {
            name: file.name,
            n: file.n,
            tau: file.tau,
            capacity: file.capacity,
            traveling_cost: file.traveling_cost,
            vehicle_cost: file.vehicle_cost,
            holding_cost: file.holding_cost,
            purchase_cost: file.purchase_cost,
            requirements: file.requirements,
            accumulation: file.accumulation,
            coordinates: file.coordinates,
            distances,
            explicit_distances: file.distances.is_some(),
        })
    }

    /// Builds an instance from explicit parts (tests and tools). The distance
    /// matrix is row-major with `d[i][i] = 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: &str,
        capacity: f64,
        traveling_cost: f64,
        vehicle_cost: f64,
        holding_cost: f64,
        purchase_cost: f64,
        requirements: Vec<f64>,
        accumulation: Vec<Vec<f64>>,
        distances: Vec<Vec<f64>>,
    ) -> Result<Instance, InstanceError> {
        Instance::from_file(InstanceFile {
            name: name.to_string(),
            n: accumulation.len(),
            tau: requirements.len(),
            capacity,
            traveling_cost,
            vehicle_cost,
            holding_cost,
            purchase_cost,
            requirements,
            accumulation,
            coordinates: None,
            distances: Some(distances),
        })
    }

    /// Number of nodes including the depot.
    pub fn num_nodes(&self) -> usize {
        self.n + 1
    }

    /// Distance from node `i` to node `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= self.n && j <= self.n);
        self.distances[i * (self.n + 1) + j]
    }

    /// Requirement r[t] for period index `t` in `0..tau`.
    #[inline]
    pub fn r(&self, t: usize) -> f64 {
        self.requirements[t]
    }

    /// Accumulation a[i][t] for node `i` in `0..=n` (0 for the depot) and
    /// period index `t` in `0..tau`.
    #[inline]
    pub fn a(&self, i: usize, t: usize) -> f64 {
        debug_assert!(i <= self.n && t < self.tau);
        if i == 0 {
            0.0
        } else {
            self.accumulation[i - 1][t]
        }
    }

    /// Total accumulation A[i] = Σ_t a[i][t] per node, indexed `0..=n`
    /// (A[0] = 0 for the depot).
    pub fn total_accumulation(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.n + 1];
        for i in 1..=self.n {
            a[i] = self.accumulation[i - 1].iter().sum();
        }
        a
    }
}

fn euclidean_matrix(coords: &[[f64; 2]]) -> Vec<f64> {
    let m = coords.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            d[i * m + j] = (dx * dx + dy * dy).sqrt();
        }
    }
    d
}

/// Benchmark family from the computational study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeId {
    /// First benchmark set, Fiorentina fleet: Q=550, v=90, c=0.19.
    Benchmark1Fio,
    /// First benchmark set, Dobrogea fleet: Q=920, v=110, c=0.22.
    Benchmark1Dob,
    /// Second benchmark set (20-100 nodes): Q=550, v=90, c=0.24.
    Benchmark2,
    /// Third benchmark set (120-300 nodes): same constants as benchmark2.
    Benchmark3,
}

impl RecipeId {
    pub fn parse(s: &str) -> Result<RecipeId, InstanceError> {
        match s.to_ascii_lowercase().as_str() {
            "benchmark1-fio" => Ok(RecipeId::Benchmark1Fio),
            "benchmark1-dob" => Ok(RecipeId::Benchmark1Dob),
            "benchmark2" => Ok(RecipeId::Benchmark2),
            "benchmark3" => Ok(RecipeId::Benchmark3),
            _ => Err(InstanceError::UnknownRecipe(s.to_string())),
        }
    }

    fn constants(self) -> (f64, f64, f64) {
        // (capacity Q, vehicle cost v, traveling cost c); h = 0.02 everywhere.
        match self {
            RecipeId::Benchmark1Fio => (550.0, 90.0, 0.19),
            RecipeId::Benchmark1Dob => (920.0, 110.0, 0.22),
            RecipeId::Benchmark2 | RecipeId::Benchmark3 => (550.0, 90.0, 0.24),
        }
    }

    fn family(self) -> &'static str {
        match self {
            RecipeId::Benchmark1Fio => "Fio",
            RecipeId::Benchmark1Dob => "Dob",
            RecipeId::Benchmark2 => "b2",
            RecipeId::Benchmark3 => "b3",
        }
    }
}

/// Requirement specification: a named level (benchmark set 1, where the
/// level value depends on the accumulation rate) or an explicit daily
/// amount in liters (benchmark sets 2/3, encoded in instance names).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Requirement {
    Low,
    Medium,
    High,
    Value(f64),
}

impl Requirement {
    fn label(self) -> Option<&'static str> {
        match self {
            Requirement::Low => Some("LOW"),
            Requirement::Medium => Some("MEDIUM"),
            Requirement::High => Some("HIGH"),
            Requirement::Value(_) => None,
        }
    }
}

/// Generator parameters for one synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub id: RecipeId,
    /// Collection node count; defaults to 25 for benchmark set 1.
    pub n: Option<usize>,
    /// Daily accumulation rate in liters (30 = low, 60 = high).
    pub accumulation: u32,
    pub requirement: Requirement,
    /// Purchase price p per liter.
    pub price: f64,
}

/// Horizon length shared by every benchmark recipe (a cyclic week).
pub const RECIPE_TAU: usize = 7;
/// Side of the square the generator draws coordinates from, in km.
pub const RECIPE_SQUARE_KM: f64 = 30.0;

/// Generates a benchmark-recipe instance. Deterministic: the same
/// `(recipe, seed)` always yields a bitwise-identical instance.
pub fn generate_instance(recipe: &Recipe, seed: u64) -> Result<Instance, InstanceError> {
    let (capacity, vehicle_cost, traveling_cost) = recipe.id.constants();
    let holding_cost = 0.02;
    let is_b1 = matches!(recipe.id, RecipeId::Benchmark1Fio | RecipeId::Benchmark1Dob);

    if recipe.accumulation != 30 && recipe.accumulation != 60 {
        return Err(InstanceError::UnsupportedCombination(format!(
            "accumulation rate must be 30 or 60 liters/day, got {}",
            recipe.accumulation
        )));
    }
    if !recipe.price.is_finite() || recipe.price < 0.0 {
        return Err(InstanceError::UnsupportedCombination(format!(
            "price must be nonnegative, got {}",
            recipe.price
        )));
    }
    let n = match (recipe.n, is_b1) {
        (Some(n), _) => n,
        (None, true) => 25,
        (None, false) => {
            return Err(InstanceError::UnsupportedCombination(
                "benchmark2/benchmark3 recipes need an explicit node count".into(),
            ))
        }
    };
    if n == 0 {
        return Err(InstanceError::UnsupportedCombination("node count must be >= 1".into()));
    }

    let r_value = match recipe.requirement {
        Requirement::Value(v) if v.is_finite() && v >= 0.0 => v,
        Requirement::Value(v) => {
            return Err(InstanceError::UnsupportedCombination(format!(
                "requirement must be nonnegative, got {v}"
            )))
        }
        level => {
            if !is_b1 {
                return Err(InstanceError::UnsupportedCombination(
                    "named requirement levels are defined for benchmark set 1 only".into(),
                ));
            }
            // 30 l/day: low 600, medium 750, high 900; doubled at 60 l/day.
            let base = match level {
                Requirement::Low => 600.0,
                Requirement::Medium => 750.0,
                Requirement::High => 900.0,
                Requirement::Value(_) => unreachable!(),
            };
            if recipe.accumulation == 60 {
                base * 2.0
            } else {
                base
            }
        }
    };

    let name = match recipe.requirement.label() {
        Some(level) if is_b1 => format!(
            "{}-{}acc-{}-{:03}-s{}",
            recipe.id.family(),
            recipe.accumulation,
            level,
            (recipe.price * 100.0).round() as u64,
            seed
        ),
        _ => format!("{}n-{}r-{}p-s{}", n, r_value, recipe.price, seed),
    };

    // Depot at the square's center, nodes uniform over the square. Coordinates
    // are derived from raw ChaCha output so the stream (and thus the instance)
    // is stable across `rand` upgrades.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(n + 1);
    coords.push([RECIPE_SQUARE_KM / 2.0, RECIPE_SQUARE_KM / 2.0]);
    for _ in 0..n {
        let x = unit_f64(rng.next_u64()) * RECIPE_SQUARE_KM;
        let y = unit_f64(rng.next_u64()) * RECIPE_SQUARE_KM;
        coords.push([x, y]);
    }

    let rate = f64::from(recipe.accumulation);
    Instance::from_file(InstanceFile {
        name,
        n,
        tau: RECIPE_TAU,
        capacity,
        traveling_cost,
        vehicle_cost,
        holding_cost,
        purchase_cost: recipe.price,
        requirements: vec![r_value; RECIPE_TAU],
        accumulation: vec![vec![rate; RECIPE_TAU]; n],
        coordinates: Some(coords),
        distances: None,
    })
}

/// Maps a raw u64 to [0, 1) using the top 53 bits.
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 / (1u64 << 53) as f64
}
