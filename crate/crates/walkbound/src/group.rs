//! Group specifications, canonical normal forms, and word arithmetic.
//!
//! Supported variants: free groups, cyclic groups (finite or infinite), free
//! products of cyclic groups, free abelian groups, and direct products. Free and
//! free-product elements share one representation, a reduced sequence of syllables
//! `(factor, exponent)` with adjacent syllables in distinct factors and exponents
//! canonical for the factor's order. Canonical forms are unique, so elements are
//! usable as hash keys.

use serde::Serialize;
use std::fmt::Write as _;

use crate::{Error, Result};

/// Order of a cyclic factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    Finite(u32),
    Infinite,
}

#[derive(Debug, Clone, Serialize)]
pub struct CyclicFactor {
    pub order: Order,
    pub label: String,
    pub weight: f64,
}

/// How a direct product is generated.
///
/// `Union` moves one coordinate per step (generators of each component, lifted).
/// `Synchronized` moves every coordinate at once: the generating set is
/// `{(x_1, .., x_{k-1}, a)}` with the first coordinates ranging over entire finite
/// components and `a` over generators of the unique infinite component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProductConvention {
    Union,
    Synchronized,
}

#[derive(Debug, Clone, Serialize)]
pub enum GroupSpec {
    Free {
        rank: usize,
        labels: Vec<String>,
        weights: Vec<f64>,
    },
    Cyclic {
        order: Order,
        label: String,
    },
    FreeProduct {
        factors: Vec<CyclicFactor>,
    },
    FreeAbelian {
        rank: usize,
        labels: Vec<String>,
    },
    DirectProduct {
        components: Vec<GroupSpec>,
        convention: ProductConvention,
    },
}

/// One run of a single factor's generator inside a reduced word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Syllable {
    pub factor: u16,
    pub exp: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Word(Vec<Syllable>),
    Vector(Vec<i64>),
    Tuple(Vec<Element>),
}

/// Word-structure view shared by Free, Cyclic, and FreeProduct variants.
pub(crate) struct WordShape {
    pub orders: Vec<Order>,
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
}

pub fn default_labels(rank: usize) -> Vec<String> {
    (0..rank)
        .map(|i| {
            if rank <= 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("g{}", i + 1)
            }
        })
        .collect()
}

impl GroupSpec {
    pub fn free(rank: usize) -> GroupSpec {
        GroupSpec::Free {
            rank,
            labels: default_labels(rank),
            weights: vec![1.0; rank],
        }
    }

    pub fn free_weighted(rank: usize, weights: Vec<f64>) -> GroupSpec {
        GroupSpec::Free {
            rank,
            labels: default_labels(rank),
            weights,
        }
    }

    pub fn cyclic(order: Order, label: &str) -> GroupSpec {
        GroupSpec::Cyclic {
            order,
            label: label.to_string(),
        }
    }

    /// The modular-group shape: Z/2 * Z/3 with generators a, b.
    pub fn modular() -> GroupSpec {
        GroupSpec::FreeProduct {
            factors: vec![
                CyclicFactor {
                    order: Order::Finite(2),
                    label: "a".into(),
                    weight: 1.0,
                },
                CyclicFactor {
                    order: Order::Finite(3),
                    label: "b".into(),
                    weight: 1.0,
                },
            ],
        }
    }

    pub fn free_abelian(rank: usize) -> GroupSpec {
        GroupSpec::FreeAbelian {
            rank,
            labels: if rank == 1 {
                vec!["t".into()]
            } else {
                (1..=rank).map(|i| format!("x{i}")).collect()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Free { rank, labels, weights } => {
                if *rank < 1 {
                    return Err(Error::Config("free group rank must be >= 1".into()));
                }
                if labels.len() != *rank || weights.len() != *rank {
                    return Err(Error::Config("labels/weights must match rank".into()));
                }
                check_weights(weights)?;
                check_labels(labels)?;
            }
            GroupSpec::Cyclic { order, .. } => {
                if let Order::Finite(m) = order {
                    if *m < 2 {
                        return Err(Error::Config("cyclic order must be >= 2".into()));
                    }
                }
            }
            GroupSpec::FreeProduct { factors } => {
                if factors.len() < 2 {
                    return Err(Error::Config("free product needs >= 2 factors".into()));
                }
                for f in factors {
                    if let Order::Finite(m) = f.order {
                        if m < 2 {
                            return Err(Error::Config("free-product factor must be nontrivial".into()));
                        }
                    }
                }
                check_weights(&factors.iter().map(|f| f.weight).collect::<Vec<_>>())?;
                check_labels(&factors.iter().map(|f| f.label.clone()).collect::<Vec<_>>())?;
            }
            GroupSpec::FreeAbelian { rank, labels } => {
                if *rank < 1 {
                    return Err(Error::Config("free abelian rank must be >= 1".into()));
                }
                if labels.len() != *rank {
                    return Err(Error::Config("labels must match rank".into()));
                }
                check_labels(labels)?;
            }
            GroupSpec::DirectProduct { components, convention } => {
                if components.len() < 2 {
                    return Err(Error::Config("direct product needs >= 2 components".into()));
                }
                for c in components {
                    c.validate()?;
                    if matches!(c, GroupSpec::DirectProduct { .. }) {
                        return Err(Error::Config("nested direct products are not supported".into()));
                    }
                }
                if *convention == ProductConvention::Synchronized {
                    let infinite: Vec<usize> = components
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.is_finite_group())
                        .map(|(i, _)| i)
                        .collect();
                    if infinite.len() != 1 {
                        return Err(Error::Config(
                            "synchronized products need exactly one infinite component".into(),
                        ));
                    }
                    for (i, c) in components.iter().enumerate() {
                        if !infinite.contains(&i) && !matches!(c, GroupSpec::Cyclic { .. }) {
                            return Err(Error::Config(
                                "synchronized products: finite components must be cyclic".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_finite_group(&self) -> bool {
        match self {
            GroupSpec::Cyclic { order: Order::Finite(_), .. } => true,
            GroupSpec::DirectProduct { components, .. } => {
                components.iter().all(|c| c.is_finite_group())
            }
            _ => false,
        }
    }

    pub(crate) fn word_shape(&self) -> Option<WordShape> {
        match self {
            GroupSpec::Free { rank, labels, weights } => Some(WordShape {
                orders: vec![Order::Infinite; *rank],
                labels: labels.clone(),
                weights: weights.clone(),
            }),
            GroupSpec::Cyclic { order, label } => Some(WordShape {
                orders: vec![*order],
                labels: vec![label.clone()],
                weights: vec![1.0],
            }),
            GroupSpec::FreeProduct { factors } => Some(WordShape {
                orders: factors.iter().map(|f| f.order).collect(),
                labels: factors.iter().map(|f| f.label.clone()).collect(),
                weights: factors.iter().map(|f| f.weight).collect(),
            }),
            _ => None,
        }
    }

    pub fn identity(&self) -> Element {
        match self {
            GroupSpec::Free { .. } | GroupSpec::Cyclic { .. } | GroupSpec::FreeProduct { .. } => {
                Element::Word(Vec::new())
            }
            GroupSpec::FreeAbelian { rank, .. } => Element::Vector(vec![0; *rank]),
            GroupSpec::DirectProduct { components, .. } => {
                Element::Tuple(components.iter().map(|c| c.identity()).collect())
            }
        }
    }

    /// True Cayley-tree structure: free groups, infinite cyclic, and free products
    /// whose factors are all Z or Z/2 (the only cases with no factor-internal loop).
    pub fn cayley_graph_is_tree(&self) -> bool {
        match self {
            GroupSpec::Free { .. } => true,
            GroupSpec::Cyclic { order, .. } => *order == Order::Infinite,
            GroupSpec::FreeProduct { factors } => factors
                .iter()
                .all(|f| matches!(f.order, Order::Infinite | Order::Finite(2))),
            _ => false,
        }
    }

    /// The symmetric generating set with display labels.
    pub fn generators(&self) -> Vec<(String, Element)> {
        match self {
            GroupSpec::Free { .. } | GroupSpec::Cyclic { .. } | GroupSpec::FreeProduct { .. } => {
                let shape = self.word_shape().unwrap();
                let mut out = Vec::new();
                for (f, order) in shape.orders.iter().enumerate() {
                    let label = &shape.labels[f];
                    match order {
                        Order::Infinite => {
                            out.push((label.clone(), word(vec![syl(f, 1)])));
                            out.push((format!("{label}^-1"), word(vec![syl(f, -1)])));
                        }
                        Order::Finite(2) => {
                            out.push((label.clone(), word(vec![syl(f, 1)])));
                        }
                        Order::Finite(m) => {
                            out.push((label.clone(), word(vec![syl(f, 1)])));
                            out.push((
                                format!("{label}^{}", m - 1),
                                word(vec![syl(f, (*m - 1) as i32)]),
                            ));
                        }
                    }
                }
                out
            }
            GroupSpec::FreeAbelian { rank, labels } => {
                let mut out = Vec::new();
                for i in 0..*rank {
                    let mut v = vec![0i64; *rank];
                    v[i] = 1;
                    out.push((labels[i].clone(), Element::Vector(v.clone())));
                    v[i] = -1;
                    out.push((format!("{}^-1", labels[i]), Element::Vector(v)));
                }
                out
            }
            GroupSpec::DirectProduct { components, convention } => match convention {
                ProductConvention::Union => {
                    let mut out = Vec::new();
                    for (ci, c) in components.iter().enumerate() {
                        for (lab, g) in c.generators() {
                            let mut tuple: Vec<Element> =
                                components.iter().map(|k| k.identity()).collect();
                            tuple[ci] = g;
                            out.push((format!("{}:{}", ci + 1, lab), Element::Tuple(tuple)));
                        }
                    }
                    out
                }
                ProductConvention::Synchronized => {
                    let infinite = components.iter().position(|c| !c.is_finite_group()).unwrap();
                    let mut finite_choices: Vec<Vec<(String, Element)>> = Vec::new();
                    for (ci, c) in components.iter().enumerate() {
                        if ci != infinite {
                            finite_choices.push(
                                c.enumerate_all()
                                    .unwrap()
                                    .into_iter()
                                    .map(|e| (self.component_display(ci, &e), e))
                                    .collect(),
                            );
                        }
                    }
                    let mut out = Vec::new();
                    for (lab, g) in components[infinite].generators() {
                        let mut stack: Vec<(Vec<(String, Element)>, usize)> = vec![(Vec::new(), 0)];
                        while let Some((chosen, k)) = stack.pop() {
                            if k == finite_choices.len() {
                                let mut tuple = Vec::new();
                                let mut name_parts = Vec::new();
                                let mut fi = 0;
                                for (ci, c) in components.iter().enumerate() {
                                    if ci == infinite {
                                        tuple.push(g.clone());
                                        name_parts.push(lab.clone());
                                    } else {
                                        tuple.push(chosen[fi].1.clone());
                                        name_parts.push(chosen[fi].0.clone());
                                        fi += 1;
                                    }
                                    let _ = c;
                                }
                                out.push((format!("({})", name_parts.join(",")), Element::Tuple(tuple)));
                            } else {
                                for choice in finite_choices[k].iter().rev() {
                                    let mut next = chosen.clone();
                                    next.push(choice.clone());
                                    stack.push((next, k + 1));
                                }
                            }
                        }
                    }
                    out
                }
            },
        }
    }

    fn component_display(&self, component: usize, e: &Element) -> String {
        if let GroupSpec::DirectProduct { components, .. } = self {
            display_element(&components[component], e)
        } else {
            unreachable!()
        }
    }

    /// All elements of a finite group (cyclic components of synchronized products).
    pub fn enumerate_all(&self) -> Result<Vec<Element>> {
        match self {
            GroupSpec::Cyclic { order: Order::Finite(m), .. } => Ok((0..*m)
                .map(|k| {
                    if k == 0 {
                        Element::Word(Vec::new())
                    } else {
                        word(vec![syl(0, k as i32)])
                    }
                })
                .collect()),
            _ => Err(Error::Unsupported("enumerate_all needs a finite cyclic group".into())),
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for w in weights {
        if !(w.is_finite() && *w > 0.0) {
            return Err(Error::Config(format!("generator weight must be positive and finite, got {w}")));
        }
    }
    Ok(())
}

fn check_labels(labels: &[String]) -> Result<()> {
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || !l.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Config(format!("bad generator label {l:?}")));
        }
        if l == "e" || l == "1" {
            return Err(Error::Config("labels e and 1 are reserved for the identity".into()));
        }
        if labels[..i].contains(l) {
            return Err(Error::Config(format!("duplicate generator label {l}")));
        }
    }
    Ok(())
}

pub(crate) fn syl(factor: usize, exp: i32) -> Syllable {
    Syllable {
        factor: factor as u16,
        exp,
    }
}

pub(crate) fn word(syllables: Vec<Syllable>) -> Element {
    Element::Word(syllables)
}

/// Canonical exponent for a factor: nonzero, and reduced mod m for finite orders.
fn canon_exp(order: Order, exp: i64) -> Option<i32> {
    match order {
        Order::Infinite => {
            if exp == 0 {
                None
            } else {
                Some(exp as i32)
            }
        }
        Order::Finite(m) => {
            let e = exp.rem_euclid(m as i64);
            if e == 0 {
                None
            } else {
                Some(e as i32)
            }
        }
    }
}

fn push_syllable(shape: &WordShape, out: &mut Vec<Syllable>, factor: u16, exp: i64) {
    let mut factor = factor;
    let mut exp = exp;
    loop {
        if let Some(last) = out.last().copied() {
            if last.factor == factor {
                out.pop();
                exp += last.exp as i64;
            }
        }
        match canon_exp(shape.orders[factor as usize], exp) {
            Some(e) => {
                out.push(Syllable { factor, exp: e });
                return;
            }
            None => {
                // full cancellation; the seam may now expose another merge
                match out.last().copied() {
                    Some(prev) => {
                        out.pop();
                        factor = prev.factor;
                        exp = prev.exp as i64;
                    }
                    None => return,
                }
            }
        }
    }
}

pub fn compose_and_reduce(spec: &GroupSpec, x: &Element, y: &Element) -> Result<Element> {
    check_element(spec, x)?;
    check_element(spec, y)?;
    Ok(compose_unchecked(spec, x, y))
}

/// Composition without canonical-form validation, for hot paths that only build
/// elements through this module.
pub(crate) fn compose_unchecked(spec: &GroupSpec, x: &Element, y: &Element) -> Element {
    match (spec, x, y) {
        (GroupSpec::FreeAbelian { .. }, Element::Vector(a), Element::Vector(b)) => {
            Element::Vector(a.iter().zip(b).map(|(p, q)| p + q).collect())
        }
        (GroupSpec::DirectProduct { components, .. }, Element::Tuple(a), Element::Tuple(b)) => {
            Element::Tuple(
                components
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(c, (p, q))| compose_unchecked(c, p, q))
                    .collect(),
            )
        }
        (_, Element::Word(a), Element::Word(b)) => {
            let shape = spec.word_shape().expect("word element for non-word spec");
            let mut out = Vec::with_capacity(a.len() + b.len());
            out.extend_from_slice(a);
            for s in b {
                push_syllable(&shape, &mut out, s.factor, s.exp as i64);
            }
            Element::Word(out)
        }
        _ => unreachable!("element/spec variant mismatch"),
    }
}

pub fn invert(spec: &GroupSpec, x: &Element) -> Result<Element> {
    check_element(spec, x)?;
    Ok(invert_unchecked(spec, x))
}

pub(crate) fn invert_unchecked(spec: &GroupSpec, x: &Element) -> Element {
    match (spec, x) {
        (GroupSpec::FreeAbelian { .. }, Element::Vector(v)) => {
            Element::Vector(v.iter().map(|a| -a).collect())
        }
        (GroupSpec::DirectProduct { components, .. }, Element::Tuple(t)) => Element::Tuple(
            components
                .iter()
                .zip(t)
                .map(|(c, e)| invert_unchecked(c, e))
                .collect(),
        ),
        (_, Element::Word(w)) => {
            let shape = spec.word_shape().expect("word element for non-word spec");
            let syllables = w
                .iter()
                .rev()
                .map(|s| Syllable {
                    factor: s.factor,
                    exp: canon_exp(shape.orders[s.factor as usize], -(s.exp as i64))
                        .expect("canonical syllable inverts to nonzero"),
                })
                .collect();
            Element::Word(syllables)
        }
        _ => unreachable!("element/spec variant mismatch"),
    }
}

/// Weighted word length. For direct products the convention decides: `Union` sums
/// component lengths; `Synchronized` counts steps of the free coordinate, with a
/// two-step penalty for elements that are nontrivial only in finite coordinates.
pub fn word_length(spec: &GroupSpec, x: &Element) -> Result<f64> {
    check_element(spec, x)?;
    Ok(length_unchecked(spec, x))
}

pub(crate) fn length_unchecked(spec: &GroupSpec, x: &Element) -> f64 {
    match (spec, x) {
        (GroupSpec::FreeAbelian { .. }, Element::Vector(v)) => {
            v.iter().map(|a| a.unsigned_abs() as f64).sum()
        }
        (GroupSpec::DirectProduct { components, convention }, Element::Tuple(t)) => {
            match convention {
                ProductConvention::Union => components
                    .iter()
                    .zip(t)
                    .map(|(c, e)| length_unchecked(c, e))
                    .sum(),
                ProductConvention::Synchronized => {
                    let infinite = components.iter().position(|c| !c.is_finite_group()).unwrap();
                    let free_len = length_unchecked(&components[infinite], &t[infinite]);
                    if free_len > 0.0 {
                        free_len
                    } else if t
                        .iter()
                        .enumerate()
                        .any(|(i, e)| i != infinite && length_unchecked(&components[i], e) > 0.0)
                    {
                        2.0
                    } else {
                        0.0
                    }
                }
            }
        }
        (_, Element::Word(w)) => {
            let shape = spec.word_shape().expect("word element for non-word spec");
            w.iter()
                .map(|s| {
                    let unit = match shape.orders[s.factor as usize] {
                        Order::Infinite => s.exp.unsigned_abs() as f64,
                        Order::Finite(m) => {
                            let e = s.exp as u32;
                            e.min(m - e) as f64
                        }
                    };
                    unit * shape.weights[s.factor as usize]
                })
                .sum()
        }
        _ => unreachable!("element/spec variant mismatch"),
    }
}

/// Validity of a canonical form against its spec.
pub fn check_element(spec: &GroupSpec, x: &Element) -> Result<()> {
    match (spec, x) {
        (GroupSpec::FreeAbelian { rank, .. }, Element::Vector(v)) => {
            if v.len() != *rank {
                return Err(Error::BadElement(format!(
                    "vector length {} for rank {rank}",
                    v.len()
                )));
            }
            Ok(())
        }
        (GroupSpec::DirectProduct { components, .. }, Element::Tuple(t)) => {
            if t.len() != components.len() {
                return Err(Error::BadElement("tuple arity mismatch".into()));
            }
            for (c, e) in components.iter().zip(t) {
                check_element(c, e)?;
            }
            Ok(())
        }
        (_, Element::Word(w)) => {
            let shape = spec
                .word_shape()
                .ok_or_else(|| Error::BadElement("word element for non-word group".into()))?;
            let mut prev: Option<u16> = None;
            for s in w {
                if s.factor as usize >= shape.orders.len() {
                    return Err(Error::BadElement(format!("factor {} out of range", s.factor)));
                }
                if prev == Some(s.factor) {
                    return Err(Error::BadElement("adjacent syllables share a factor".into()));
                }
                let ok = match shape.orders[s.factor as usize] {
                    Order::Infinite => s.exp != 0,
                    Order::Finite(m) => s.exp > 0 && (s.exp as u32) < m,
                };
                if !ok {
                    return Err(Error::BadElement(format!(
                        "exponent {} not canonical for factor {}",
                        s.exp, s.factor
                    )));
                }
                prev = Some(s.factor);
            }
            Ok(())
        }
        _ => Err(Error::BadElement("element shape does not match group".into())),
    }
}

pub fn display_element(spec: &GroupSpec, x: &Element) -> String {
    match (spec, x) {
        (_, Element::Word(w)) if w.is_empty() => "e".to_string(),
        (_, Element::Word(w)) => {
            let shape = spec.word_shape().expect("word element for non-word spec");
            let mut s = String::new();
            for (i, sy) in w.iter().enumerate() {
                if i > 0 {
                    s.push(' ');
                }
                let lab = &shape.labels[sy.factor as usize];
                if sy.exp == 1 {
                    let _ = write!(s, "{lab}");
                } else {
                    let _ = write!(s, "{lab}^{}", sy.exp);
                }
            }
            s
        }
        (_, Element::Vector(v)) => {
            let inner: Vec<String> = v.iter().map(|a| a.to_string()).collect();
            format!("({})", inner.join(","))
        }
        (GroupSpec::DirectProduct { components, .. }, Element::Tuple(t)) => {
            let inner: Vec<String> = components
                .iter()
                .zip(t)
                .map(|(c, e)| display_element(c, e))
                .collect();
            format!("({})", inner.join(", "))
        }
        _ => "<invalid>".to_string(),
    }
}

/// Parse an element expression: words like `a b^2 a^-1` (separators optional),
/// vectors like `(3,-1)`, tuples like `(b, a b)`, identity `e` or `1`.
pub fn parse_element(spec: &GroupSpec, input: &str) -> Result<Element> {
    let s = input.trim();
    if s.is_empty() || s == "e" || s == "1" {
        return Ok(spec.identity());
    }
    match spec {
        GroupSpec::FreeAbelian { rank, .. } => {
            let inner = strip_parens(s)
                .ok_or_else(|| Error::BadElement(format!("expected vector syntax, got {s:?}")))?;
            let parts: Vec<&str> = inner.split(',').collect();
            if parts.len() != *rank {
                return Err(Error::BadElement(format!(
                    "vector arity {} does not match rank {rank}",
                    parts.len()
                )));
            }
            let mut v = Vec::with_capacity(*rank);
            for p in parts {
                let n: i64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::BadElement(format!("bad vector entry {p:?}")))?;
                if n.unsigned_abs() > 1_000_000 {
                    return Err(Error::BadElement("vector entry out of range".into()));
                }
                v.push(n);
            }
            Ok(Element::Vector(v))
        }
        GroupSpec::DirectProduct { components, .. } => {
            let inner = strip_parens(s)
                .ok_or_else(|| Error::BadElement(format!("expected tuple syntax, got {s:?}")))?;
            let parts = split_top_level(inner);
            if parts.len() != components.len() {
                return Err(Error::BadElement(format!(
                    "tuple arity {} does not match {} components",
                    parts.len(),
                    components.len()
                )));
            }
            let t = components
                .iter()
                .zip(parts)
                .map(|(c, p)| parse_element(c, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(Element::Tuple(t))
        }
        _ => parse_word(spec, s),
    }
}

fn strip_parens(s: &str) -> Option<&str> {
    let s = s.trim();
    if s.starts_with('(') && s.ends_with(')') && s.len() >= 2 {
        Some(&s[1..s.len() - 1])
    } else {
        None
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_word(spec: &GroupSpec, s: &str) -> Result<Element> {
    let shape = spec
        .word_shape()
        .ok_or_else(|| Error::BadElement("word syntax for non-word group".into()))?;
    let bytes = s.as_bytes();
    let mut i = 0usize;
    let mut out: Vec<Syllable> = Vec::new();
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() || c == '*' || c == '.' {
            i += 1;
            continue;
        }
        // longest label match
        let rest = &s[i..];
        let mut chosen: Option<(usize, usize)> = None; // (factor, label_len)
        for (f, lab) in shape.labels.iter().enumerate() {
            if rest.starts_with(lab.as_str())
                && chosen.map_or(true, |(_, l)| lab.len() > l)
            {
                chosen = Some((f, lab.len()));
            }
        }
        let (factor, lab_len) = chosen.ok_or_else(|| {
            Error::BadElement(format!("unknown generator at {rest:?}"))
        })?;
        i += lab_len;
        let mut exp: i64 = 1;
        if i < bytes.len() && bytes[i] == b'^' {
            i += 1;
            let start = i;
            if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                i += 1;
            }
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            exp = s[start..i]
                .parse()
                .map_err(|_| Error::BadElement(format!("bad exponent in {s:?}")))?;
            if exp.unsigned_abs() > 1_000_000 {
                return Err(Error::BadElement("exponent out of range".into()));
            }
        }
        push_syllable(&shape, &mut out, factor as u16, exp);
    }
    Ok(Element::Word(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupSpec {
        GroupSpec::free(2)
    }

    fn parse(spec: &GroupSpec, s: &str) -> Element {
        parse_element(spec, s).unwrap()
    }

    #[test]
    fn free_group_cancellation() {
        let spec = f2();
        let a = parse(&spec, "a");
        let a_inv = parse(&spec, "a^-1");
        assert_eq!(compose_and_reduce(&spec, &a, &a_inv).unwrap(), spec.identity());
    }

    #[test]
    fn cyclic_order_relation() {
        let spec = GroupSpec::cyclic(Order::Finite(3), "b");
        let b = parse(&spec, "b");
        let b2 = parse(&spec, "b^2");
        assert_eq!(compose_and_reduce(&spec, &b, &b2).unwrap(), spec.identity());
        assert_eq!(compose_and_reduce(&spec, &b, &b).unwrap(), b2);
    }

    #[test]
    fn free_product_deep_cancellation() {
        // (ab)(b^2 a) = a b^3 a = a a = e in Z/2 * Z/3
        let spec = GroupSpec::modular();
        let ab = parse(&spec, "a b");
        let b2a = parse(&spec, "b^2 a");
        assert_eq!(compose_and_reduce(&spec, &ab, &b2a).unwrap(), spec.identity());
    }

    #[test]
    fn associativity_exhaustive_on_small_balls() {
        for spec in [GroupSpec::modular(), f2()] {
            let ball = crate::census::enumerate_ball(&spec, 2).unwrap();
            for x in &ball {
                for y in &ball {
                    let xy = compose_unchecked(&spec, x, y);
                    for z in &ball {
                        let yz = compose_unchecked(&spec, y, z);
                        assert_eq!(
                            compose_unchecked(&spec, &xy, z),
                            compose_unchecked(&spec, x, &yz)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn inversion_examples() {
        let spec = f2();
        let x = parse(&spec, "a b^-1 a");
        let expected = parse(&spec, "a^-1 b a^-1");
        assert_eq!(invert(&spec, &x).unwrap(), expected);

        let zz = GroupSpec::free_abelian(2);
        let v = parse(&zz, "(3,-1)");
        assert_eq!(invert(&zz, &v).unwrap(), parse(&zz, "(-3,1)"));

        let spec = GroupSpec::modular();
        for s in ["a", "b", "b^2", "a b", "b a b^2 a"] {
            let x = parse(&spec, s);
            let inv = invert(&spec, &x).unwrap();
            assert_eq!(compose_and_reduce(&spec, &x, &inv).unwrap(), spec.identity());
            assert_eq!(invert(&spec, &inv).unwrap(), x);
        }
    }

    #[test]
    fn word_lengths() {
        let spec = f2();
        assert_eq!(word_length(&spec, &parse(&spec, "a b a b^-1")).unwrap(), 4.0);

        let weighted = GroupSpec::free_weighted(2, vec![1.0, 0.5]);
        assert_eq!(word_length(&weighted, &parse(&weighted, "a b")).unwrap(), 1.5);

        let z3 = GroupSpec::cyclic(Order::Finite(3), "b");
        assert_eq!(word_length(&z3, &parse(&z3, "b^2")).unwrap(), 1.0);

        let z5 = GroupSpec::cyclic(Order::Finite(5), "b");
        assert_eq!(word_length(&z5, &parse(&z5, "b^2")).unwrap(), 2.0);
        assert_eq!(word_length(&z5, &parse(&z5, "b^4")).unwrap(), 1.0);
    }

    #[test]
    fn length_invariance_under_inverse() {
        let spec = GroupSpec::modular();
        for s in ["a", "b", "a b", "b^2 a b", "a b a b^2"] {
            let x = parse(&spec, s);
            let inv = invert_unchecked(&spec, &x);
            assert_eq!(
                word_length(&spec, &x).unwrap(),
                word_length(&spec, &inv).unwrap()
            );
        }
    }

    #[test]
    fn display_parse_roundtrip() {
        let specs = [f2(), GroupSpec::modular()];
        for spec in &specs {
            for x in crate::census::enumerate_ball(spec, 4).unwrap() {
                let shown = display_element(spec, &x);
                assert_eq!(parse(spec, &shown), x, "roundtrip failed for {shown}");
            }
        }
    }

    #[test]
    fn tuple_parse_and_length_conventions() {
        let spec = GroupSpec::DirectProduct {
            components: vec![GroupSpec::cyclic(Order::Finite(3), "x"), f2()],
            convention: ProductConvention::Synchronized,
        };
        spec.validate().unwrap();
        let g = parse(&spec, "(x, a)");
        assert_eq!(word_length(&spec, &g).unwrap(), 1.0);
        let torsion_only = parse(&spec, "(x, e)");
        assert_eq!(word_length(&spec, &torsion_only).unwrap(), 2.0);
        assert_eq!(word_length(&spec, &spec.identity()).unwrap(), 0.0);

        let union = GroupSpec::DirectProduct {
            components: vec![GroupSpec::cyclic(Order::Finite(3), "x"), f2()],
            convention: ProductConvention::Union,
        };
        assert_eq!(word_length(&union, &parse(&union, "(x, a b)")).unwrap(), 3.0);
    }

    #[test]
    fn synchronized_generator_count() {
        let spec = GroupSpec::DirectProduct {
            components: vec![GroupSpec::cyclic(Order::Finite(3), "x"), f2()],
            convention: ProductConvention::Synchronized,
        };
        let gens = spec.generators();
        assert_eq!(gens.len(), 12); // |Z/3| * 4 free-group generators
        // symmetric: inverse of every generator is a generator
        for (_, g) in &gens {
            let inv = invert_unchecked(&spec, g);
            assert!(gens.iter().any(|(_, h)| *h == inv));
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(GroupSpec::free(0).validate().is_err());
        assert!(GroupSpec::cyclic(Order::Finite(1), "b").validate().is_err());
        assert!(GroupSpec::free_weighted(1, vec![0.0]).validate().is_err());
        assert!(GroupSpec::FreeProduct {
            factors: vec![CyclicFactor {
                order: Order::Finite(2),
                label: "a".into(),
                weight: 1.0
            }]
        }
        .validate()
        .is_err());
        let nested = GroupSpec::DirectProduct {
            components: vec![
                GroupSpec::DirectProduct {
                    components: vec![f2(), f2()],
                    convention: ProductConvention::Union,
                },
                f2(),
            ],
            convention: ProductConvention::Union,
        };
        assert!(nested.validate().is_err());
        let two_infinite = GroupSpec::DirectProduct {
            components: vec![f2(), f2()],
            convention: ProductConvention::Synchronized,
        };
        assert!(two_infinite.validate().is_err());
    }

    #[test]
    fn malformed_elements_rejected() {
        let spec = f2();
        assert!(parse_element(&spec, "c").is_err());
        assert!(parse_element(&spec, "a^").is_err());
        let bad = Element::Word(vec![syl(0, 1), syl(0, 1)]);
        assert!(check_element(&spec, &bad).is_err());
        let bad_exp = Element::Word(vec![syl(0, 0)]);
        assert!(check_element(&spec, &bad_exp).is_err());
        let z3 = GroupSpec::cyclic(Order::Finite(3), "b");
        assert!(check_element(&z3, &Element::Word(vec![syl(0, 3)])).is_err());
        assert!(check_element(&spec, &Element::Vector(vec![1])).is_err());
    }
}
