//! Exact planar primitives: convex clipping and shoelace areas.
//!
//! The microstructure right-hand side is an indicator function of an
//! axis-aligned square, so its element integrals are areas of
//! triangle/square intersections. These are computed with
//! Sutherland-Hodgman clipping followed by the shoelace formula.

/// A point in the plane.
pub type Point = [f64; 2];

/// Distance below which consecutive clip vertices are merged, and below which a
/// vertex is considered to lie on the line through its neighbours.
pub const MERGE_TOL: f64 = 1e-14;

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Signed area of the triangle `(a, b, c)`; positive for counterclockwise order.
#[inline]
pub fn triangle_signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

/// A convex polygon with counterclockwise vertices, or the empty polygon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon from vertices. Clockwise input is reversed so that the
    /// stored orientation is always counterclockwise; degenerate input yields
    /// the empty polygon.
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut poly = Polygon { vertices };
        poly.cleanup();
        if signed_area(&poly.vertices) < 0.0 {
            poly.vertices.reverse();
        }
        poly
    }

    pub fn empty() -> Self {
        Polygon::default()
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn triangle(a: Point, b: Point, c: Point) -> Self {
        Polygon::new(vec![a, b, c])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Drops near-duplicate and collinear vertices; fewer than three survivors
    /// or zero area leave the polygon empty.
    fn cleanup(&mut self) {
        let v = &mut self.vertices;
        let mut changed = true;
        while changed && v.len() >= 3 {
            changed = false;
            let n = v.len();
            for i in 0..n {
                let prev = v[(i + n - 1) % n];
                let cur = v[i];
                let next = v[(i + 1) % n];
                let base = norm(sub(next, prev));
                let dup = norm(sub(cur, prev)) <= MERGE_TOL;
                let collinear = cross(sub(cur, prev), sub(next, prev)).abs() <= MERGE_TOL * base;
                if dup || collinear {
                    v.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        if v.len() < 3 || signed_area(v) == 0.0 {
            v.clear();
        }
    }
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for j in 0..n {
        let a = vertices[j];
        let b = vertices[(j + 1) % n];
        sum += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * sum
}

/// Shoelace area `1/2 |sum_j (x_j y_{j+1} - y_j x_{j+1})|` with cyclic closure.
/// Polygons with fewer than three vertices have zero area.
pub fn polygon_area(poly: &Polygon) -> f64 {
    signed_area(&poly.vertices).abs()
}

/// Intersection of two convex counterclockwise polygons by Sutherland-Hodgman.
///
/// Points on a clip edge count as inside, so the result is the closed
/// intersection. A subject lying entirely inside `clip` is returned with its
/// vertex list unchanged.
pub fn clip_convex(subject: &Polygon, clip: &Polygon) -> Polygon {
    if subject.is_empty() || clip.is_empty() {
        return Polygon::empty();
    }
    let mut output: Vec<Point> = subject.vertices.clone();
    let cv = &clip.vertices;
    for i in 0..cv.len() {
        if output.is_empty() {
            break;
        }
        let a = cv[i];
        let b = cv[(i + 1) % cv.len()];
        let dir = sub(b, a);
        let side = |p: Point| cross(dir, sub(p, a));
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().unwrap();
        let mut d_prev = side(prev);
        for &cur in &input {
            let d_cur = side(cur);
            if (d_prev < 0.0 && d_cur > 0.0) || (d_prev > 0.0 && d_cur < 0.0) {
                output.push(line_crossing(prev, cur, d_prev, d_cur, a, b));
            }
            if d_cur >= 0.0 {
                output.push(cur);
            }
            prev = cur;
            d_prev = d_cur;
        }
    }
    let mut poly = Polygon { vertices: output };
    poly.cleanup();
    poly
}

/// Point where segment `p -> q` crosses the clip line through `a` and `b`.
/// Coordinates on axis-parallel clip lines are snapped exactly onto the line.
fn line_crossing(p: Point, q: Point, dp: f64, dq: f64, a: Point, b: Point) -> Point {
    let t = dp / (dp - dq);
    let mut x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
    if a[0] == b[0] {
        x[0] = a[0];
    }
    if a[1] == b[1] {
        x[1] = a[1];
    }
    x
}
