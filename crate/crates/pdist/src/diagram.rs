//! Persistence diagrams: the point data model, the text file format, and
//! diagram-level helpers (normalization, common-point removal).

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One off-diagonal point of a persistence diagram, with an integer
/// multiplicity ("mass").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
    pub mass: u64,
}

impl DiagramPoint {
    /// A point with unit mass.
    ///
    /// Panics if the coordinates are not finite or `death < birth`.
    pub fn new(birth: f64, death: f64) -> Self {
        Self::with_mass(birth, death, 1)
    }

    /// Panics if the coordinates are not finite, `death < birth`, or
    /// `mass == 0`.
    pub fn with_mass(birth: f64, death: f64, mass: u64) -> Self {
        assert!(
            birth.is_finite() && death.is_finite(),
            "diagram point coordinates must be finite"
        );
        assert!(death >= birth, "diagram point must satisfy birth <= death");
        assert!(mass >= 1, "diagram point mass must be positive");
        DiagramPoint { birth, death, mass }
    }

    /// `death - birth`.
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// Orthogonal projection onto the diagonal: `((b+d)/2, (b+d)/2)`.
    pub fn projection(&self) -> [f64; 2] {
        let m = 0.5 * (self.birth + self.death);
        [m, m]
    }
}

/// A finite multiset of birth/death points. The diagonal (which conceptually
/// carries infinite multiplicity) is handled by the instance construction,
/// not stored here.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<DiagramPoint>) -> Self {
        PersistenceDiagram { points }
    }

    pub fn empty() -> Self {
        PersistenceDiagram { points: Vec::new() }
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sum of masses.
    pub fn total_mass(&self) -> u64 {
        self.points.iter().map(|p| p.mass).sum()
    }

    /// Expands every point of mass `m` into `m` contiguous unit-mass copies,
    /// preserving input order.
    pub fn expand(&self) -> PersistenceDiagram {
        let mut out = Vec::with_capacity(self.total_mass() as usize);
        for p in &self.points {
            for _ in 0..p.mass {
                out.push(DiagramPoint { mass: 1, ..*p });
            }
        }
        PersistenceDiagram::new(out)
    }

    /// Merges points with identical coordinates into single entries with
    /// summed masses. Order follows the first occurrence of each coordinate
    /// pair. Duplicates are never merged implicitly elsewhere; call this
    /// when multi-point semantics are wanted.
    pub fn normalized(&self) -> PersistenceDiagram {
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut out: Vec<DiagramPoint> = Vec::new();
        for p in &self.points {
            let key = coord_key(p);
            match index.get(&key) {
                Some(&i) => out[i].mass += p.mass,
                None => {
                    index.insert(key, out.len());
                    out.push(*p);
                }
            }
        }
        PersistenceDiagram::new(out)
    }
}

/// Exact-representation key for a point's coordinates; -0.0 folds onto 0.0.
fn coord_key(p: &DiagramPoint) -> (u64, u64) {
    let norm = |x: f64| if x == 0.0 { 0.0f64 } else { x }.to_bits();
    (norm(p.birth), norm(p.death))
}

/// Parses the diagram file format.
///
/// One point per line as `birth death` or `birth death mass`, fields
/// separated by ASCII spaces or tabs. `#` starts a comment running to the
/// end of the line; blank lines are ignored. Coordinates are decimal or
/// scientific-notation reals, the mass a positive decimal integer.
pub fn parse_diagram(text: &str) -> Result<PersistenceDiagram> {
    let mut points = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("");
        let mut fields = line.split([' ', '\t', '\r']).filter(|f| !f.is_empty());
        let birth = match fields.next() {
            Some(f) => parse_coord(f, line_no)?,
            None => continue, // blank line
        };
        let death = match fields.next() {
            Some(f) => parse_coord(f, line_no)?,
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `birth death` or `birth death mass`".into(),
                })
            }
        };
        let mass = match fields.next() {
            Some(f) => parse_mass(f, line_no)?,
            None => 1,
        };
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("unexpected trailing field `{extra}`"),
            });
        }
        if death < birth {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("death {death} is below birth {birth}"),
            });
        }
        points.push(DiagramPoint { birth, death, mass });
    }
    Ok(PersistenceDiagram::new(points))
}

fn parse_coord(field: &str, line: usize) -> Result<f64> {
    let value: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{field}` is not a real number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("coordinate `{field}` is not finite"),
        });
    }
    Ok(value)
}

fn parse_mass(field: &str, line: usize) -> Result<u64> {
    let mass: u64 = field.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("`{field}` is not a positive integer mass"),
    })?;
    if mass == 0 {
        return Err(Error::Parse {
            line,
            msg: "mass must be at least 1".into(),
        });
    }
    Ok(mass)
}

/// Subtracts the common off-diagonal multiset of `x` and `y` mass-wise from
/// both. For q = 1 the Wasserstein distance is unchanged; for q > 1 it is
/// not, so callers must restrict this to the q = 1 path.
pub fn remove_common_points(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
) -> (PersistenceDiagram, PersistenceDiagram) {
    let mut y_mass: HashMap<(u64, u64), u64> = HashMap::new();
    for p in y.points() {
        *y_mass.entry(coord_key(p)).or_insert(0) += p.mass;
    }

    // Common mass per coordinate, capped by what x actually holds.
    let mut common: HashMap<(u64, u64), u64> = HashMap::new();
    {
        let mut y_left = y_mass.clone();
        for p in x.points() {
            let key = coord_key(p);
            if let Some(avail) = y_left.get_mut(&key) {
                let take = p.mass.min(*avail);
                if take > 0 {
                    *common.entry(key).or_insert(0) += take;
                    *avail -= take;
                }
            }
        }
    }

    let subtract = |d: &PersistenceDiagram| {
        let mut left = common.clone();
        let mut out = Vec::new();
        for p in d.points() {
            let mut keep = p.mass;
            if let Some(avail) = left.get_mut(&coord_key(p)) {
                let take = keep.min(*avail);
                keep -= take;
                *avail -= take;
            }
            if keep > 0 {
                out.push(DiagramPoint { mass: keep, ..*p });
            }
        }
        PersistenceDiagram::new(out)
    };

    (subtract(x), subtract(y))
}
