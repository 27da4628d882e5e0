//! Protocol fragments with ordered holes over a list of resource slots.
//!
//! A comb is one concrete stage tuple `(g_0..g_p)` with memory wires
//! `Y_1..Y_p` and an injection picking which signature slots the holes use.
//! Stage conventions (hole object first): `g_0: C -> A_{i(1)} (x) Y_1`,
//! `g_t: B_{i(t)} (x) Y_t -> A_{i(t+1)} (x) Y_{t+1}`, and
//! `g_p: B_{i(p)} (x) Y_p -> D`. Equality of combs is extensional: two stage
//! tuples represent the same comb when every fill agrees, which the tests
//! check by filling with spanning resources.

use alloc::vec::Vec;

use crate::channels::{AlgebraObject, Channel};
use crate::error::{Error, Result};
use crate::metrics::diamond_lower_estimate;

/// A tuple of channels matching a comb's resource slots.
#[derive(Clone, Debug)]
pub struct ResourceTuple {
    channels: Vec<Channel>,
}

impl ResourceTuple {
    pub fn new(channels: Vec<Channel>) -> Self {
        Self { channels }
    }

    /// `m` copies of the same resource.
    pub fn iid(channel: &Channel, m: usize) -> Self {
        Self { channels: alloc::vec![channel.clone(); m] }
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// A hole-bearing protocol fragment; see the module docs for the stage
/// typing invariants (validated by [`Comb::new`]).
#[derive(Clone, Debug)]
pub struct Comb {
    signature: Vec<(AlgebraObject, AlgebraObject)>,
    injection: Vec<usize>,
    stages: Vec<Channel>,
    memories: Vec<AlgebraObject>,
}

impl Comb {
    /// Validates the stage typing against the signature and injection.
    ///
    /// `injection[t]` is the 0-indexed signature slot used by hole `t + 1`;
    /// it must be injective but need not be monotone. `stages.len()` must be
    /// `injection.len() + 1` and `memories.len()` must equal
    /// `injection.len()`.
    pub fn new(
        signature: Vec<(AlgebraObject, AlgebraObject)>,
        injection: Vec<usize>,
        stages: Vec<Channel>,
        memories: Vec<AlgebraObject>,
    ) -> Result<Self> {
        let p = injection.len();
        if stages.len() != p + 1 || memories.len() != p {
            return Err(Error::SignatureMismatch);
        }
        let mut seen = alloc::vec![false; signature.len()];
        for &slot in &injection {
            if slot >= signature.len() || seen[slot] {
                return Err(Error::SignatureMismatch);
            }
            seen[slot] = true;
        }
        for t in 0..p {
            let (a, b) = &signature[injection[t]];
            let expect_cod = a.tensor(&memories[t]);
            if *stages[t].codomain() != expect_cod {
                return Err(Error::SignatureMismatch);
            }
            let expect_dom = b.tensor(&memories[t]);
            if *stages[t + 1].domain() != expect_dom {
                return Err(Error::SignatureMismatch);
            }
        }
        Ok(Self { signature, injection, stages, memories })
    }

    /// Wraps a channel as a comb with no holes and an empty signature.
    pub fn from_channel(ch: Channel) -> Self {
        Self {
            signature: Vec::new(),
            injection: Vec::new(),
            stages: alloc::vec![ch],
            memories: Vec::new(),
        }
    }

    pub fn signature(&self) -> &[(AlgebraObject, AlgebraObject)] {
        &self.signature
    }

    pub fn injection(&self) -> &[usize] {
        &self.injection
    }

    pub fn stages(&self) -> &[Channel] {
        &self.stages
    }

    pub fn memories(&self) -> &[AlgebraObject] {
        &self.memories
    }

    /// Number of used holes.
    pub fn holes(&self) -> usize {
        self.injection.len()
    }

    pub fn domain(&self) -> &AlgebraObject {
        self.stages[0].domain()
    }

    pub fn codomain(&self) -> &AlgebraObject {
        self.stages[self.stages.len() - 1].codomain()
    }

    /// Plugs resources into the holes:
    /// `g_p . (a_{i(p)} (x) id) . ... . (a_{i(1)} (x) id) . g_0`.
    /// Unused slots are ignored.
    pub fn fill(&self, resources: &ResourceTuple) -> Result<Channel> {
        if resources.len() != self.signature.len() {
            return Err(Error::SignatureMismatch);
        }
        for (ch, (a, b)) in resources.channels().iter().zip(&self.signature) {
            if ch.domain() != a || ch.codomain() != b {
                return Err(Error::SignatureMismatch);
            }
        }
        let mut acc = self.stages[0].clone();
        for t in 0..self.holes() {
            let slotted = resources.channels()[self.injection[t]]
                .tensor(&Channel::identity(&self.memories[t]));
            acc = self.stages[t + 1].compose(&slotted.compose(&acc)?)?;
        }
        Ok(acc)
    }

    /// Splices `inner` into signature slot `slot` (0-indexed) of `self`.
    ///
    /// The result's signature replaces that slot with `inner`'s whole
    /// signature; its fill equals filling `self` with `fill(inner, ...)` in
    /// that slot. Hole counts add minus one when the slot is in use.
    pub fn nest(&self, inner: &Comb, slot: usize) -> Result<Comb> {
        if slot >= self.signature.len() {
            return Err(Error::SignatureMismatch);
        }
        let (slot_a, slot_b) = &self.signature[slot];
        if inner.domain() != slot_a || inner.codomain() != slot_b {
            return Err(Error::SignatureMismatch);
        }

        let m_inner = inner.signature.len();
        let mut signature = Vec::with_capacity(self.signature.len() + m_inner - 1);
        signature.extend_from_slice(&self.signature[..slot]);
        signature.extend_from_slice(&inner.signature);
        signature.extend_from_slice(&self.signature[slot + 1..]);
        // Outer slots keep their index below `slot` and shift above it.
        let remap = |s: usize| if s < slot { s } else { s + m_inner - 1 };

        let used_at = self.injection.iter().position(|&s| s == slot);
        let Some(j) = used_at else {
            // Unused slot: the inner comb can never influence any fill.
            let injection = self.injection.iter().map(|&s| remap(s)).collect();
            return Comb::new(signature, injection, self.stages.clone(), self.memories.clone());
        };

        let p_inner = inner.holes();
        let mut injection = Vec::with_capacity(self.holes() + p_inner - 1);
        let mut stages: Vec<Channel> = Vec::with_capacity(self.stages.len() + p_inner - 1);
        let mut memories = Vec::with_capacity(self.memories.len() + p_inner - 1);

        for t in 0..j {
            injection.push(remap(self.injection[t]));
            stages.push(self.stages[t].clone());
            memories.push(self.memories[t].clone());
        }
        let carried = &self.memories[j];
        let id_carried = Channel::identity(carried);
        if p_inner == 0 {
            // Plain channel: it merges the two adjacent outer stages.
            let merged = self.stages[j + 1]
                .compose(&inner.stages[0].tensor(&id_carried).compose(&self.stages[j])?)?;
            stages.push(merged);
        } else {
            stages.push(inner.stages[0].tensor(&id_carried).compose(&self.stages[j])?);
            for t in 0..p_inner {
                injection.push(slot + inner.injection[t]);
                memories.push(inner.memories[t].tensor(carried));
                if t + 1 < p_inner {
                    stages.push(inner.stages[t + 1].tensor(&id_carried));
                }
            }
            stages
                .push(self.stages[j + 1].compose(&inner.stages[p_inner].tensor(&id_carried))?);
        }
        for t in j + 1..self.holes() {
            injection.push(remap(self.injection[t]));
            stages.push(self.stages[t + 1].clone());
            memories.push(self.memories[t].clone());
        }
        Comb::new(signature, injection, stages, memories)
    }

    /// Parallel composition: signatures concatenate and
    /// `fill(c1 ++ c2, r1 ++ r2) = fill(c1, r1) (x) fill(c2, r2)`.
    ///
    /// The combined run executes `self` first while `other`'s domain waits in
    /// memory, then `other` with `self`'s output riding along.
    pub fn concat(&self, other: &Comb) -> Result<Comb> {
        let m1 = self.signature.len();
        let p1 = self.holes();
        let p2 = other.holes();
        let d1 = self.codomain().clone();
        let c2 = other.domain().clone();

        let mut signature = self.signature.clone();
        signature.extend_from_slice(&other.signature);
        let mut injection: Vec<usize> = self.injection.clone();
        injection.extend(other.injection.iter().map(|&s| m1 + s));

        let mut stages = Vec::with_capacity(p1 + p2 + 1);
        let mut memories = Vec::with_capacity(p1 + p2);
        let id_c2 = Channel::identity(&c2);
        let id_d1 = Channel::identity(&d1);
        for t in 0..p1 {
            stages.push(self.stages[t].tensor(&id_c2));
            memories.push(self.memories[t].tensor(&c2));
        }
        // Bridge: finish self, start other, and when other still has holes
        // move self's output behind the new hole and memory wires.
        let mut bridge =
            id_d1.tensor(&other.stages[0]).compose(&self.stages[p1].tensor(&id_c2))?;
        if p2 > 0 {
            let (a1, _) = &other.signature[other.injection[0]];
            let perm = Channel::permute_factors(
                &[d1.clone(), a1.clone(), other.memories[0].clone()],
                &[1, 2, 0],
            )?;
            bridge = perm.compose(&bridge)?;
        }
        stages.push(bridge);
        for t in 0..p2 {
            memories.push(other.memories[t].tensor(&d1));
            // Middle stages keep D1 trailing; the final stage emits D2 (x) D1
            // and must restore D1 (x) D2.
            let mut stage = other.stages[t + 1].tensor(&id_d1);
            if t + 1 == p2 {
                let d2 = other.codomain().clone();
                let perm = Channel::permute_factors(&[d2, d1.clone()], &[1, 0])?;
                stage = perm.compose(&stage)?;
            }
            stages.push(stage);
        }
        Comb::new(signature, injection, stages, memories)
    }
}

/// Lower estimate of the l1 resource distance: the summed diamond-distance
/// estimates across matching slots.
pub fn resource_metric(
    r1: &ResourceTuple,
    r2: &ResourceTuple,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::SignatureMismatch);
    }
    let mut acc = 0.0;
    for (i, (a, b)) in r1.channels().iter().zip(r2.channels()).enumerate() {
        if a.domain() != b.domain() || a.codomain() != b.codomain() {
            return Err(Error::SignatureMismatch);
        }
        acc += diamond_lower_estimate(a, b, budget, seed.wrapping_add(i as u64))?;
    }
    Ok(acc)
}
