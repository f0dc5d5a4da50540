//! Symmetric Gaussian quadrature on the reference triangle (0,0), (1,0), (0,1).
//!
//! Rules are stored in barycentric coordinates with weights summing to the
//! reference area 1/2, and every provided rule has strictly positive weights.
//! The degree-3 and degree-7 requests are served by the next stronger rule
//! because the classical 4- and 13-point rules of those degrees carry a
//! negative weight.

use crate::mesh::Vec2;
use crate::{Error, Result};

/// Quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates (l0, l1, l2) of each point.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to 1/2.
    pub weights: Vec<f64>,
    /// Guaranteed polynomial exactness degree.
    pub degree: usize,
}

/// Quadrature points mapped to a physical cell, weights scaled by |det J|.
#[derive(Debug, Clone)]
pub struct MappedRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

/// Returns a rule exact for all bivariate polynomials of total degree <= `d`.
pub fn rule_for_degree(d: usize) -> Result<&'static QuadratureRule> {
    if !(1..=10).contains(&d) {
        return Err(Error::QuadratureDegree(d));
    }
    let rules = rules();
    Ok(rules
        .iter()
        .find(|r| r.degree >= d)
        .expect("table covers degrees up to 10"))
}

/// Maps `rule` to the triangle with the given vertices.
pub fn map_to_cell(rule: &QuadratureRule, verts: [Vec2; 3]) -> Result<MappedRule> {
    let [p0, p1, p2] = verts;
    let det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(Error::DegenerateCell(0.5 * det));
    }
    let scale = det.abs();
    let points = rule
        .points
        .iter()
        .map(|&[l0, l1, l2]| p0 * l0 + p1 * l1 + p2 * l2)
        .collect();
    let weights = rule.weights.iter().map(|w| w * scale).collect();
    Ok(MappedRule { points, weights })
}

fn rules() -> &'static [QuadratureRule] {
    use std::sync::OnceLock;
    static RULES: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    RULES.get_or_init(build_rules)
}

/// Expands symmetric orbits into explicit points. `w` values follow the usual
/// normalization Σw = 1 and are halved here so weights sum to the reference area.
struct RuleBuilder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl RuleBuilder {
    fn new() -> Self {
        RuleBuilder {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn centroid(&mut self, w: f64) -> &mut Self {
        self.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], w)
    }

    /// Three permutations of (a, b, b) with a = 1 - 2b.
    fn orbit3(&mut self, w: f64, b: f64) -> &mut Self {
        let a = 1.0 - 2.0 * b;
        self.push([a, b, b], w).push([b, a, b], w).push([b, b, a], w)
    }

    /// Six permutations of (a, b, c) with c = 1 - a - b.
    fn orbit6(&mut self, w: f64, a: f64, b: f64) -> &mut Self {
        let c = 1.0 - a - b;
        self.push([a, b, c], w)
            .push([a, c, b], w)
            .push([b, a, c], w)
            .push([b, c, a], w)
            .push([c, a, b], w)
            .push([c, b, a], w)
    }

    fn push(&mut self, bary: [f64; 3], w: f64) -> &mut Self {
        self.points.push(bary);
        self.weights.push(0.5 * w);
        self
    }

    fn finish(&mut self, degree: usize) -> QuadratureRule {
        QuadratureRule {
            points: std::mem::take(&mut self.points),
            weights: std::mem::take(&mut self.weights),
            degree,
        }
    }
}

fn build_rules() -> Vec<QuadratureRule> {
    let mut rules = Vec::new();

    // degree 1: centroid
    rules.push(RuleBuilder::new().centroid(1.0).finish(1));

    // degree 2: three interior points
    rules.push(RuleBuilder::new().orbit3(1.0 / 3.0, 1.0 / 6.0).finish(2));

    // degree 4 (6 points), also serves degree-3 requests
    rules.push(
        RuleBuilder::new()
            .orbit3(0.223381589678011, 0.445948490915965)
            .orbit3(0.109951743655322, 0.091576213509771)
            .finish(4),
    );

    // degree 5 (7 points)
    rules.push(
        RuleBuilder::new()
            .centroid(0.225)
            .orbit3(0.132394152788506, 0.470142064105115)
            .orbit3(0.125939180544827, 0.101286507323456)
            .finish(5),
    );

    // degree 6 (12 points)
    rules.push(
        RuleBuilder::new()
            .orbit3(0.116786275726379, 0.249286745170910)
            .orbit3(0.050844906370207, 0.063089014491502)
            .orbit6(0.082851075618374, 0.053145049844816, 0.310352451033785)
            .finish(6),
    );

    // degree 8 (16 points), also serves degree-7 requests
    rules.push(
        RuleBuilder::new()
            .centroid(0.14431560767778717)
            .orbit3(0.09509163426728462, 0.45929258829272316)
            .orbit3(0.10321737053471825, 0.17056930775176021)
            .orbit3(0.03245849762319808, 0.05054722831703098)
            .orbit6(0.02723031417443499, 0.008394777409957605, 0.26311282963463811)
            .finish(8),
    );

    // degree 9 (19 points)
    rules.push(
        RuleBuilder::new()
            .centroid(0.097135796282799)
            .orbit3(0.031334700227139, 0.489682519198738)
            .orbit3(0.077827541004774, 0.437089591492937)
            .orbit3(0.079647738927210, 0.188203535619033)
            .orbit3(0.025577675658698, 0.044729513394453)
            .orbit6(0.043283539377289, 0.036838412054736, 0.221962989160766)
            .finish(9),
    );

    // degree 10 (25 points)
    rules.push(
        RuleBuilder::new()
            .centroid(0.090817990382754)
            .orbit3(0.036725957756467, 0.485577633383657)
            .orbit3(0.045321059435528, 0.109481575485037)
            .orbit6(0.072757916845420, 0.141707219414880, 0.307939838764121)
            .orbit6(0.028327242531057, 0.025003534762686, 0.246672560639903)
            .orbit6(0.009421666963733, 0.009540815400299, 0.066803251012200)
            .finish(10),
    );

    rules
}

/// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
/// Test oracle, exposed for reuse by the symbolic element-matrix oracles.
pub fn monomial_integral(a: u32, b: u32) -> f64 {
    // a! b! / (a+b+2)! computed as a product to stay in range
    let mut val = 1.0;
    // 1 / prod_{k=a+1..a+b+2} k, times b!
    for k in 1..=b {
        val *= k as f64;
    }
    for k in (a + 1)..=(a + b + 2) {
        val /= k as f64;
    }
    val
}
