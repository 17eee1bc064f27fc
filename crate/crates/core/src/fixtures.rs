//! Reference fibers: hyperbolic genus-g surfaces from the regular
//! 4g-gon, and a flat torus for operator tests.

use crate::surface::{CornerData, Fiber};
use crate::{Error, Result, C64};
use std::collections::HashMap;
use std::f64::consts::PI;

/// A Möbius map `(a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug)]
pub struct Mobius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mobius {
    pub fn identity() -> Mobius {
        let (o, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Mobius { a: i, b: o, c: o, d: i }
    }

    pub fn rotation(theta: f64) -> Mobius {
        Mobius { a: C64::from_polar(1.0, theta), ..Mobius::identity() }
    }

    /// Hyperbolic translation by distance `t` along the geodesic through
    /// the origin in direction `phi`.
    pub fn translation(phi: f64, t: f64) -> Mobius {
        let r = C64::new((t / 2.0).tanh(), 0.0);
        let one = C64::new(1.0, 0.0);
        let tau = Mobius { a: one, b: r, c: r, d: one };
        Mobius::rotation(phi).compose(&tau).compose(&Mobius::rotation(-phi))
    }

    /// The disk automorphism `(z - c)/(1 - c̄ z)` taking `c` to the origin.
    pub fn centring(c: C64) -> Mobius {
        let one = C64::new(1.0, 0.0);
        Mobius { a: one, b: -c, c: -c.conj(), d: one }
    }

    pub fn apply(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (den * den)
    }

    pub fn second_derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        -2.0 * self.c * (self.a * self.d - self.b * self.c) / (den * den * den)
    }

    /// `self ∘ other`.
    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }
}

/// Hyperbolic distance in the unit disk.
pub fn disk_distance(p: C64, q: C64) -> f64 {
    let t = ((q - p) / (C64::new(1.0, 0.0) - p.conj() * q)).norm();
    2.0 * t.atanh()
}

/// Midpoint of the hyperbolic geodesic from `p` to `q`.
pub fn disk_midpoint(p: C64, q: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let w = (q - p) / (one - p.conj() * q);
    let r = w.norm();
    if r == 0.0 {
        return p;
    }
    let m = w / r * (r.atanh() / 2.0).tanh();
    (m + p) / (one + p.conj() * m)
}

/// Regular hyperbolic 4g-gon with interior angles π/(2g) and its side
/// pairings `a₁ b₁ a₁⁻¹ b₁⁻¹ …`.
#[derive(Clone, Debug)]
pub struct FundamentalPolygon {
    pub genus: usize,
    pub corners: Vec<C64>,
    /// `pairing[j] = (i, γ)` for each secondary side `j`: γ maps side `j`
    /// onto side `i`, reversing its direction.
    pub pairing: Vec<(usize, usize, Mobius)>,
}

impl FundamentalPolygon {
    pub fn new(genus: usize) -> Result<FundamentalPolygon> {
        if genus < 2 {
            return Err(Error::Invalid(format!("hyperbolic polygon needs genus >= 2, got {genus}")));
        }
        let n = 4 * genus;
        let cot = 1.0 / (PI / n as f64).tan();
        let rho = (cot * cot).acosh();
        let inradius = cot.acosh();
        let r = (rho / 2.0).tanh();
        let corners = (0..n).map(|k| C64::from_polar(r, 2.0 * PI * k as f64 / n as f64)).collect();
        let mid_angle = |k: usize| 2.0 * PI * (k as f64 + 0.5) / n as f64;
        let mut pairing = Vec::new();
        for m in 0..genus {
            for (i, j) in [(4 * m, 4 * m + 2), (4 * m + 1, 4 * m + 3)] {
                let (pi, pj) = (mid_angle(i), mid_angle(j));
                let g = Mobius::translation(pi, 2.0 * inradius).compose(&Mobius::rotation(pi + PI - pj));
                pairing.push((j, i, g));
            }
        }
        Ok(FundamentalPolygon { genus, corners, pairing })
    }

    pub fn sides(&self) -> usize {
        self.corners.len()
    }
}

/// A genus-g fixture together with the index of the vertex at the
/// polygon centre.
#[derive(Clone, Debug)]
pub struct HyperbolicFixture {
    pub fiber: Fiber,
    pub polygon: FundamentalPolygon,
    pub level: usize,
    pub center: usize,
    /// Combinatorial distance from the centre vertex to the polygon
    /// corners along a fan ray (2^{subdivisions}).
    pub ray_steps: usize,
    /// Per face corner, the Möbius map from the vertex's home chart to
    /// the face chart.
    pub corner_maps: Vec<[Mobius; 3]>,
}

/// Number of midpoint subdivisions applied to the fan for `level`.
pub fn subdivisions(level: usize) -> usize {
    level + 1
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Tag {
    Interior,
    Corner(usize),
    Side(usize),
}

fn on_side(t: Tag, k: usize, n: usize) -> bool {
    match t {
        Tag::Interior => false,
        Tag::Corner(c) => c == k || (c + n - 1) % n == k,
        Tag::Side(s) => s == k,
    }
}

fn common_side(a: Tag, b: Tag, n: usize) -> Option<usize> {
    (0..n).find(|&k| on_side(a, k, n) && on_side(b, k, n))
}

/// Genus-g hyperbolic fiber at the given refinement level (>= 1).
pub fn hyperbolic_fixture(genus: usize, level: usize) -> Result<HyperbolicFixture> {
    if level == 0 {
        return Err(Error::Invalid("level 0 is not a simplicial complex; use level >= 1".into()));
    }
    let poly = FundamentalPolygon::new(genus)?;
    let n = poly.sides();
    let mut pts: Vec<(C64, Tag)> = vec![(C64::new(0.0, 0.0), Tag::Interior)];
    pts.extend(poly.corners.iter().enumerate().map(|(k, &z)| (z, Tag::Corner(k))));
    let mut tris: Vec<[usize; 3]> = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
    for _ in 0..subdivisions(level) {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, pts: &mut Vec<(C64, Tag)>| -> usize {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let tag = match common_side(pts[a].1, pts[b].1, n) {
                    Some(k) => Tag::Side(k),
                    None => Tag::Interior,
                };
                pts.push((disk_midpoint(pts[a].0, pts[b].0), tag));
                pts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * tris.len());
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut pts);
            let bc = mid(b, c, &mut pts);
            let ca = mid(c, a, &mut pts);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    // Deck transformations taking the home chart of each point to the
    // polygon chart at that point.
    let mut side_map: HashMap<usize, (usize, Mobius)> = HashMap::new();
    for &(j, i, g) in &poly.pairing {
        side_map.insert(j, (i, g));
    }
    let corner_maps = corner_transitions(&poly);
    let mut rep = vec![usize::MAX; pts.len()];
    let mut deck = vec![Mobius::identity(); pts.len()];
    let mut by_side: HashMap<usize, Vec<usize>> = HashMap::new();
    for (idx, (_, t)) in pts.iter().enumerate() {
        if let Tag::Side(k) = t {
            by_side.entry(*k).or_default().push(idx);
        }
    }
    for (idx, &(z, t)) in pts.iter().enumerate() {
        match t {
            Tag::Interior => rep[idx] = idx,
            Tag::Corner(k) => {
                rep[idx] = 1;
                deck[idx] = corner_maps[k];
            }
            Tag::Side(k) => match side_map.get(&k) {
                None => rep[idx] = idx,
                Some(&(i, g)) => {
                    let target = g.apply(z);
                    let hit = by_side[&i]
                        .iter()
                        .copied()
                        .min_by(|&a, &b| (pts[a].0 - target).norm().partial_cmp(&(pts[b].0 - target).norm()).unwrap())
                        .ok_or_else(|| Error::Invariant(format!("side {i} has no vertices")))?;
                    if (pts[hit].0 - target).norm() > 1e-9 {
                        return Err(Error::Invariant(format!("side pairing misses a vertex by {}", (pts[hit].0 - target).norm())));
                    }
                    rep[idx] = hit;
                    deck[idx] = g.inverse();
                }
            },
        }
    }
    let mut index = vec![usize::MAX; pts.len()];
    let mut home = Vec::new();
    for idx in 0..pts.len() {
        if rep[idx] == idx {
            index[idx] = home.len();
            home.push(pts[idx].0);
        }
    }
    // Each face gets the disk chart centred at its centroid, so that
    // neighbouring face charts differ by near-identity Möbius maps.
    let mut corner_maps = Vec::with_capacity(tris.len());
    let faces = tris
        .iter()
        .map(|t| {
            let v = t.map(|p| index[rep[p]]);
            let centre = (pts[t[0]].0 + pts[t[1]].0 + pts[t[2]].0) / 3.0;
            let chart = Mobius::centring(centre);
            let maps = t.map(|p| chart.compose(&deck[p]));
            let at = t.map(|p| pts[rep[p]].0);
            corner_maps.push(maps);
            CornerData {
                v,
                z: [0, 1, 2].map(|c| maps[c].apply(at[c])),
                dz: [0, 1, 2].map(|c| maps[c].derivative(at[c])),
                d2z: [0, 1, 2].map(|c| maps[c].second_derivative(at[c])),
            }
        })
        .collect();
    let fiber = Fiber::from_faces(home, faces, 2)?;
    if fiber.genus != genus {
        return Err(Error::Invariant(format!("built genus {} instead of {genus}", fiber.genus)));
    }
    Ok(HyperbolicFixture { fiber, polygon: poly, level, center: 0, ray_steps: 1 << subdivisions(level), corner_maps })
}

/// For each polygon corner k, the deck transformation mapping corner 0
/// to corner k, found by walking the side pairings.
fn corner_transitions(poly: &FundamentalPolygon) -> Vec<Mobius> {
    let n = poly.sides();
    let mut links: Vec<(usize, usize, Mobius)> = Vec::new();
    for &(j, i, g) in &poly.pairing {
        // γ maps corner j to corner i+1 and corner j+1 to corner i
        for (from, to) in [(j, (i + 1) % n), ((j + 1) % n, i)] {
            links.push((from, to, g));
            links.push((to, from, g.inverse()));
        }
    }
    let mut maps: Vec<Option<Mobius>> = vec![None; n];
    maps[0] = Some(Mobius::identity());
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(a) = queue.pop_front() {
        let da = maps[a].unwrap();
        for &(from, to, g) in &links {
            if from == a && maps[to].is_none() {
                maps[to] = Some(g.compose(&da));
                queue.push_back(to);
            }
        }
    }
    maps.into_iter().map(|m| m.expect("corner cycle is connected")).collect()
}

/// Flat unit-square torus with an `n × n` grid (n = 4·2^level), for
/// operator tests. Its genus is 1, so it is not an admissible fiber.
pub fn flat_torus(level: usize) -> Result<Fiber> {
    let n = 4usize << level;
    let h = 1.0 / n as f64;
    let id = |i: usize, j: usize| (i % n) + n * (j % n);
    let home: Vec<C64> = (0..n * n).map(|k| C64::new((k % n) as f64 * h, (k / n) as f64 * h)).collect();
    let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let pos = |i: usize, j: usize| C64::new(i as f64 * h, j as f64 * h);
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            for (a, b, c) in [((i, j), (i + 1, j), (i + 1, j + 1)), ((i, j), (i + 1, j + 1), (i, j + 1))] {
                faces.push(CornerData {
                    v: [id(a.0, a.1), id(b.0, b.1), id(c.0, c.1)],
                    z: [pos(a.0, a.1), pos(b.0, b.1), pos(c.0, c.1)],
                    dz: [one; 3],
                    d2z: [zero; 3],
                });
            }
        }
    }
    Fiber::from_faces(home, faces, 0)
}
