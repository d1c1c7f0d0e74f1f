//! Interning context: canonical forms map to dense integer ids so distributions
//! can key on `u32` instead of owning words. Lengths and inverses are cached.

use std::collections::HashMap;

use crate::group::{
    check_element, compose_unchecked, display_element, invert_unchecked, length_unchecked,
    Element, GroupSpec,
};
use crate::Result;

pub struct GroupCtx {
    pub spec: GroupSpec,
    elems: Vec<Element>,
    lengths: Vec<f64>,
    inverses: Vec<Option<u32>>,
    map: HashMap<Element, u32>,
}

pub const IDENTITY_ID: u32 = 0;

impl GroupCtx {
    pub fn new(spec: GroupSpec) -> Result<GroupCtx> {
        spec.validate()?;
        let mut ctx = GroupCtx {
            spec,
            elems: Vec::new(),
            lengths: Vec::new(),
            inverses: Vec::new(),
            map: HashMap::new(),
        };
        let e = ctx.spec.identity();
        ctx.intern(e);
        Ok(ctx)
    }

    pub fn intern(&mut self, x: Element) -> u32 {
        if let Some(&id) = self.map.get(&x) {
            return id;
        }
        let id = self.elems.len() as u32;
        self.lengths.push(length_unchecked(&self.spec, &x));
        self.map.insert(x.clone(), id);
        self.elems.push(x);
        self.inverses.push(None);
        id
    }

    /// Intern with canonical-form validation, for externally supplied elements.
    pub fn intern_checked(&mut self, x: Element) -> Result<u32> {
        check_element(&self.spec, &x)?;
        Ok(self.intern(x))
    }

    pub fn element(&self, id: u32) -> &Element {
        &self.elems[id as usize]
    }

    pub fn length(&self, id: u32) -> f64 {
        self.lengths[id as usize]
    }

    pub fn display(&self, id: u32) -> String {
        display_element(&self.spec, self.element(id))
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn compose_ids(&mut self, x: u32, y: u32) -> u32 {
        let z = compose_unchecked(&self.spec, &self.elems[x as usize], &self.elems[y as usize]);
        self.intern(z)
    }

    pub fn invert_id(&mut self, x: u32) -> u32 {
        if let Some(inv) = self.inverses[x as usize] {
            return inv;
        }
        let inv_elem = invert_unchecked(&self.spec, &self.elems[x as usize]);
        let inv = self.intern(inv_elem);
        self.inverses[x as usize] = Some(inv);
        if (inv as usize) < self.inverses.len() {
            self.inverses[inv as usize] = Some(x);
        }
        inv
    }
}
