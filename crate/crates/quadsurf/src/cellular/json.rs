//! JSON exchange format for complexes and cochains.
//!
//! Beyond the base fields, a file may carry `sides` (per-quad edge ids) and
//! `edges` (endpoints with optional displacement) so multi-edges and flat
//! tori round-trip; `rho` entries may name their `quad`; `meta` may hold a
//! period `lattice` and attached `cycles`.

use super::{Cochain, Color, ComplexTag, ConformalStructure, DiamondPath, QuadComplex};
use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    pub color: Color,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoJson {
    pub edge: [usize; 2],
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeJson {
    pub ends: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dz: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleJson {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetaJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genus: Option<usize>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cycles: Vec<CycleJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexJson {
    pub vertices: Vec<VertexJson>,
    pub quads: Vec<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<RhoJson>>,
    #[serde(default)]
    pub meta: MetaJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<[usize; 4]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeJson>>,
}

fn c(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

impl ComplexJson {
    pub fn from_complex(cx: &QuadComplex) -> ComplexJson {
        let z = cx.z();
        let vertices = (0..cx.n_vertices())
            .map(|v| VertexJson { id: v, color: cx.color(v), z: z.map(|z| pair(z[v])) })
            .collect();
        let rho = (0..cx.n_faces())
            .map(|q| {
                let (a, b) = cx.lambda_edge(q);
                RhoJson { edge: [a, b], value: cx.rho(q), quad: Some(q) }
            })
            .collect();
        let dz = cx.dz();
        let edges = (0..cx.n_edges())
            .map(|e| EdgeJson { ends: cx.edge(e), dz: dz.map(|d| pair(d[e])) })
            .collect();
        ComplexJson {
            vertices,
            quads: cx.quads().to_vec(),
            rho: Some(rho),
            meta: MetaJson {
                genus: cx.genus(),
                closed: cx.is_closed(),
                origin: cx.origin(),
                lattice: cx.lattice().map(|l| [pair(l[0]), pair(l[1])]),
                cycles: cx
                    .attached_cycles()
                    .iter()
                    .map(|p| CycleJson { vertices: p.vertices.clone(), edges: p.edges.clone() })
                    .collect(),
            },
            sides: Some((0..cx.n_faces()).map(|q| cx.sides(q)).collect()),
            edges: Some(edges),
        }
    }

    pub fn into_complex(self) -> Result<QuadComplex> {
        let index: HashMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        if index.len() != self.vertices.len() {
            return Err(Error::InvalidComplex("duplicate vertex ids".into()));
        }
        let vid = |id: usize| index.get(&id).copied().ok_or_else(|| Error::InvalidComplex(format!("unknown vertex id {id}")));
        let colors: Vec<Color> = self.vertices.iter().map(|v| v.color).collect();
        let quads: Vec<[usize; 4]> = self
            .quads
            .iter()
            .map(|q| Ok([vid(q[0])?, vid(q[1])?, vid(q[2])?, vid(q[3])?]))
            .collect::<Result<_>>()?;
        let (sides, edges, dz) = match (self.sides, self.edges) {
            (Some(sides), Some(edges)) => {
                let ends: Vec<[usize; 2]> =
                    edges.iter().map(|e| Ok([vid(e.ends[0])?, vid(e.ends[1])?])).collect::<Result<_>>()?;
                let dz: Option<Vec<C64>> = edges.iter().map(|e| e.dz.map(c)).collect();
                (sides, ends, dz)
            }
            (None, None) => {
                let mut map: HashMap<(usize, usize), usize> = HashMap::new();
                let mut ends = Vec::new();
                let sides = quads
                    .iter()
                    .map(|q| {
                        let mut s = [0; 4];
                        for k in 0..4 {
                            let (a, b) = (q[k], q[(k + 1) % 4]);
                            let key = (a.min(b), a.max(b));
                            let next = ends.len();
                            s[k] = *map.entry(key).or_insert_with(|| next);
                            if s[k] == next {
                                ends.push(if k % 2 == 0 { [a, b] } else { [b, a] });
                            }
                        }
                        s
                    })
                    .collect();
                (sides, ends, None)
            }
            _ => return Err(Error::InvalidComplex("sides and edges must be given together".into())),
        };
        let nf = quads.len();
        let mut conf = ConformalStructure::uniform(nf, 1.0);
        let mut gamma_set = vec![false; nf];
        for r in self.rho.unwrap_or_default() {
            let (a, b) = (vid(r.edge[0])?, vid(r.edge[1])?);
            let same = |u: usize, w: usize| (u == a && w == b) || (u == b && w == a);
            let targets: Vec<usize> = match r.quad {
                Some(q) if q < nf => vec![q],
                Some(q) => return Err(Error::InvalidComplex(format!("rho entry names quad {q}"))),
                None => (0..nf).filter(|&q| same(quads[q][0], quads[q][2]) || same(quads[q][1], quads[q][3])).collect(),
            };
            if targets.is_empty() {
                return Err(Error::InvalidComplex(format!("rho edge {:?} is not a quad diagonal", r.edge)));
            }
            for q in targets {
                if same(quads[q][0], quads[q][2]) {
                    conf.rho[q] = r.value;
                    gamma_set[q] = true;
                } else if same(quads[q][1], quads[q][3]) {
                    conf.declared_dual[q] = Some(r.value);
                } else {
                    return Err(Error::InvalidComplex(format!("rho edge {:?} is not a diagonal of quad {q}", r.edge)));
                }
            }
        }
        // a Γ* value alone determines its Γ partner
        for q in 0..nf {
            if let (false, Some(d)) = (gamma_set[q], conf.declared_dual[q]) {
                conf.rho[q] = 1.0 / d;
            }
        }
        let z: Option<Vec<C64>> = self.vertices.iter().map(|v| v.z.map(c)).collect();
        let dz = dz.or_else(|| z.as_ref().map(|z| edges.iter().map(|&[s, t]| z[t] - z[s]).collect()));
        let cycles = self
            .meta
            .cycles
            .iter()
            .map(|p| {
                Ok(DiamondPath { vertices: p.vertices.iter().map(|&v| vid(v)).collect::<Result<_>>()?, edges: p.edges.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let origin = self.meta.origin.map(vid).transpose()?;
        let cx = QuadComplex::from_parts(colors, quads, sides, edges, conf)?
            .with_embedding(z, dz)
            .with_origin(origin)
            .with_lattice(self.meta.lattice.map(|l| [c(l[0]), c(l[1])]))
            .with_cycles(cycles);
        Ok(cx)
    }
}

impl QuadComplex {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ComplexJson::from_complex(self)).expect("complex serializes")
    }

    pub fn from_json(s: &str) -> Result<QuadComplex> {
        let j: ComplexJson = serde_json::from_str(s)?;
        j.into_complex()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CochainValueJson {
    pub cell: usize,
    pub v: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CochainJson {
    pub degree: usize,
    pub complex: ComplexTag,
    pub values: Vec<CochainValueJson>,
}

impl Cochain {
    pub fn to_json_value(&self) -> CochainJson {
        CochainJson {
            degree: self.degree,
            complex: self.tag,
            values: self.values.iter().enumerate().map(|(i, z)| CochainValueJson { cell: i, v: pair(*z) }).collect(),
        }
    }

    pub fn from_json_value(j: &CochainJson, len: usize) -> Result<Cochain> {
        let mut vals = vec![C64::new(0.0, 0.0); len];
        for e in &j.values {
            if e.cell >= len {
                return Err(Error::Mismatch { expected: len, got: e.cell + 1 });
            }
            vals[e.cell] = c(e.v);
        }
        Ok(Cochain { degree: j.degree, tag: j.complex, values: vals })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{generate_origami, generate_square_torus, ViolationKind};

    #[test]
    fn roundtrip_preserves_structure() {
        let cx = generate_square_torus(1, 1, 0.7).unwrap();
        let back = QuadComplex::from_json(&cx.to_json()).unwrap();
        assert_eq!(back.quads(), cx.quads());
        assert_eq!(back.edges(), cx.edges());
        assert_eq!(back.conformal().rho, cx.conformal().rho);
        assert_eq!(back.attached_cycles(), cx.attached_cycles());
        assert_eq!(back.dz(), cx.dz());
        assert_eq!(back.to_json(), cx.to_json());
    }

    #[test]
    fn minimal_format_loads() {
        let s = r#"{"vertices":[{"id":10,"color":"primal"},{"id":11,"color":"dual"},{"id":12,"color":"primal"},{"id":13,"color":"dual"}],
                   "quads":[[10,11,12,13]],"rho":[{"edge":[10,12],"value":2.0}],"meta":{"genus":0,"closed":false}}"#;
        let cx = QuadComplex::from_json(s).unwrap();
        assert_eq!(cx.rho(0), 2.0);
        assert_eq!(cx.n_edges(), 4);
    }

    #[test]
    fn tampered_reciprocity_detected() {
        let cx = generate_origami(&[0, 1], &[1, 0], 1.0).unwrap();
        let mut j = ComplexJson::from_complex(&cx);
        let q = cx.quad(0);
        j.rho.as_mut().unwrap().push(RhoJson { edge: [q[1], q[3]], value: 2.0, quad: Some(0) });
        let back = j.into_complex().unwrap();
        assert!(back.validate().iter().any(|v| v.kind == ViolationKind::Reciprocity));
    }
}
