//! Reduction of diagram distances to bipartite matching instances.
//!
//! For diagrams X and Y with off-diagonal points X0 and Y0, the bidder side
//! is X0 together with the diagonal projections of Y0, and the object side
//! is Y0 together with the projections of X0. An off-diagonal point may be
//! matched to any off-diagonal point of the other side or to its own
//! projection; pairing it with a foreign projection (a "skew" pair) never
//! improves the optimum and is excluded outright.

use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};

/// L-infinity distance between two planar points.
#[inline]
pub fn linf(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// `x^q` with fast paths for the common exponents.
#[inline]
pub fn pow_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    OffDiagonal,
    DiagonalProjection,
}

/// A vertex of the matching instance: planar coordinates, its kind, and the
/// index (on the opposite side) of its projection partner.
#[derive(Debug, Clone, Copy)]
pub struct InstancePoint {
    pub coords: [f64; 2],
    pub kind: PointKind,
    /// For an off-diagonal bidder: the object that is its own diagonal
    /// projection. For a diagonal bidder: the off-diagonal object it was
    /// projected from. Symmetrically for objects.
    pub partner: usize,
}

/// The bipartite structure with unit masses expanded. Immutable after
/// construction.
#[derive(Debug, Clone)]
pub struct MatchingInstance {
    pub bidders: Vec<InstancePoint>,
    pub objects: Vec<InstancePoint>,
    /// Cost exponent; bottleneck algorithms ignore it and use plain
    /// distances.
    pub q: f64,
}

impl MatchingInstance {
    /// Common cardinality of both sides.
    pub fn len(&self) -> usize {
        self.bidders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bidders.is_empty()
    }

    /// True iff pairing `bidder` with `object` is a skew pair, i.e. exactly
    /// one endpoint is a diagonal projection and it is not the other's own.
    #[inline]
    pub fn is_skew(&self, bidder: usize, object: usize) -> bool {
        let b = &self.bidders[bidder];
        let o = &self.objects[object];
        match (b.kind, o.kind) {
            (PointKind::OffDiagonal, PointKind::DiagonalProjection) => b.partner != object,
            (PointKind::DiagonalProjection, PointKind::OffDiagonal) => b.partner != object,
            _ => false,
        }
    }

    /// Edge weight `c(u, v)`: the L-infinity distance when either endpoint
    /// is off-diagonal, 0 when both lie on the diagonal.
    ///
    /// Panics (debug builds) when called on a skew pair; callers must never
    /// form one.
    #[inline]
    pub fn distance(&self, bidder: usize, object: usize) -> f64 {
        debug_assert!(
            !self.is_skew(bidder, object),
            "skew pair evaluated: bidder {bidder} x object {object}"
        );
        let b = &self.bidders[bidder];
        let o = &self.objects[object];
        if b.kind == PointKind::DiagonalProjection && o.kind == PointKind::DiagonalProjection {
            0.0
        } else {
            linf(b.coords, o.coords)
        }
    }

    /// `c(u, v)^q` under the instance exponent.
    #[inline]
    pub fn cost(&self, bidder: usize, object: usize) -> f64 {
        pow_q(self.distance(bidder, object), self.q)
    }

    /// Number of off-diagonal bidders; off-diagonal bidders occupy indices
    /// `0..off_bidders`, diagonal ones the rest.
    pub fn off_bidders(&self) -> usize {
        self.bidders
            .iter()
            .position(|p| p.kind == PointKind::DiagonalProjection)
            .unwrap_or(self.bidders.len())
    }

    /// Number of off-diagonal objects; same layout convention as bidders.
    pub fn off_objects(&self) -> usize {
        self.objects
            .iter()
            .position(|p| p.kind == PointKind::DiagonalProjection)
            .unwrap_or(self.objects.len())
    }
}

/// Builds the matching instance for diagrams `x` and `y`, expanding masses
/// into contiguous unit copies in input order.
///
/// Bidders are the expanded points of `x` followed by the projections of
/// `y`'s points; objects are the expanded points of `y` followed by the
/// projections of `x`'s points.
pub fn build_instance(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
) -> Result<MatchingInstance> {
    if x.is_empty() && y.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if q < 1.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cost exponent q must be a finite real >= 1, got {q}"
        )));
    }
    let xe = x.expand();
    let ye = y.expand();
    let nx = xe.points().len();
    let ny = ye.points().len();
    let n = nx + ny;

    let mut bidders = Vec::with_capacity(n);
    let mut objects = Vec::with_capacity(n);

    // Bidders: X0 first, then projections of Y0.
    for (i, p) in xe.points().iter().enumerate() {
        bidders.push(InstancePoint {
            coords: [p.birth, p.death],
            kind: PointKind::OffDiagonal,
            partner: ny + i, // its projection among the objects
        });
    }
    for (j, p) in ye.points().iter().enumerate() {
        bidders.push(InstancePoint {
            coords: p.projection(),
            kind: PointKind::DiagonalProjection,
            partner: j, // the object it projects
        });
    }

    // Objects: Y0 first, then projections of X0.
    for (j, p) in ye.points().iter().enumerate() {
        objects.push(InstancePoint {
            coords: [p.birth, p.death],
            kind: PointKind::OffDiagonal,
            partner: nx + j,
        });
    }
    for (i, p) in xe.points().iter().enumerate() {
        objects.push(InstancePoint {
            coords: p.projection(),
            kind: PointKind::DiagonalProjection,
            partner: i,
        });
    }

    Ok(MatchingInstance {
        bidders,
        objects,
        q,
    })
}

/// An off-diagonal multi-point of a mass instance.
#[derive(Debug, Clone, Copy)]
pub struct MultiPoint {
    pub coords: [f64; 2],
    pub mass: u64,
    /// L-infinity distance to its own diagonal projection, computed from
    /// the projected coordinates so it matches the expanded instance
    /// bit-for-bit.
    pub diag_dist: f64,
}

/// Bidder identifier in a mass instance: an off-diagonal multi-bidder or the
/// single aggregated diagonal multi-bidder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassBidderId {
    Off(usize),
    Diagonal,
}

/// Object identifier in a mass instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MassObjectId {
    Off(usize),
    Diagonal,
}

/// The multi-point instance. Unlike [`MatchingInstance`], masses are kept
/// aggregated, skew weights are lowered to the owner's projection distance
/// (which makes every pair admissible), and all diagonal entities collapse
/// into one multi-bidder of mass `m_Y` and one multi-object of mass `m_X`.
/// A diagonal entity of mass 0 is omitted entirely.
#[derive(Debug, Clone)]
pub struct MassInstance {
    /// Off-diagonal multi-bidders (from X), input order.
    pub bidders: Vec<MultiPoint>,
    /// Off-diagonal multi-objects (from Y), input order.
    pub objects: Vec<MultiPoint>,
    /// Mass of the aggregated diagonal multi-bidder (total mass of Y).
    pub diag_bidder_mass: u64,
    /// Mass of the aggregated diagonal multi-object (total mass of X).
    pub diag_object_mass: u64,
    pub q: f64,
}

impl MassInstance {
    /// Total mass of either side.
    pub fn total_mass(&self) -> u64 {
        self.diag_object_mass + self.diag_bidder_mass
    }

    /// Benefit of `object` to `bidder`: the negated q-th power of the
    /// modified cost. Defined for every pair.
    pub fn benefit(&self, bidder: MassBidderId, object: MassObjectId) -> f64 {
        -pow_q(self.base_distance(bidder, object), self.q)
    }

    /// The modified cost before exponentiation: plain L-infinity distance
    /// for off/off pairs, the off-diagonal endpoint's projection distance
    /// when only one side is diagonal, and 0 for diagonal/diagonal.
    pub fn base_distance(&self, bidder: MassBidderId, object: MassObjectId) -> f64 {
        match (bidder, object) {
            (MassBidderId::Off(i), MassObjectId::Off(j)) => {
                linf(self.bidders[i].coords, self.objects[j].coords)
            }
            (MassBidderId::Off(i), MassObjectId::Diagonal) => self.bidders[i].diag_dist,
            (MassBidderId::Diagonal, MassObjectId::Off(j)) => self.objects[j].diag_dist,
            (MassBidderId::Diagonal, MassObjectId::Diagonal) => 0.0,
        }
    }

    pub fn bidder_mass(&self, bidder: MassBidderId) -> u64 {
        match bidder {
            MassBidderId::Off(i) => self.bidders[i].mass,
            MassBidderId::Diagonal => self.diag_bidder_mass,
        }
    }

    pub fn object_mass(&self, object: MassObjectId) -> u64 {
        match object {
            MassObjectId::Off(j) => self.objects[j].mass,
            MassObjectId::Diagonal => self.diag_object_mass,
        }
    }
}

/// Builds the aggregated multi-point instance; masses are kept as given.
pub fn build_mass_instance(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
) -> Result<MassInstance> {
    if x.is_empty() && y.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if q < 1.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cost exponent q must be a finite real >= 1, got {q}"
        )));
    }
    let to_multi = |d: &PersistenceDiagram| {
        d.points()
            .iter()
            .map(|p| MultiPoint {
                coords: [p.birth, p.death],
                mass: p.mass,
                diag_dist: linf([p.birth, p.death], p.projection()),
            })
            .collect::<Vec<_>>()
    };
    Ok(MassInstance {
        bidders: to_multi(x),
        objects: to_multi(y),
        diag_bidder_mass: y.total_mass(),
        diag_object_mass: x.total_mass(),
        q,
    })
}
