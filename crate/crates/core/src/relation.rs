//! Union-find whose elements carry an offset in Z/4 relative to their root.
//!
//! Used per map node: elements are the node's neighbours and the offset of a
//! neighbour is its bearing (in quarter turns) relative to the component root.

#[derive(Debug, Clone)]
pub struct OffsetUnionFind {
    parent: Vec<usize>,
    // offset[i] = potential(i) - potential(parent[i]) (mod 4)
    offset: Vec<u8>,
    rank: Vec<u8>,
}

impl OffsetUnionFind {
    pub fn new(n: usize) -> Self {
        OffsetUnionFind {
            parent: (0..n).collect(),
            offset: vec![0; n],
            rank: vec![0; n],
        }
    }

    /// Returns the root of `x` and `potential(x) - potential(root)`.
    pub fn find(&mut self, x: usize) -> (usize, u8) {
        let p = self.parent[x];
        if p == x {
            return (x, 0);
        }
        let (root, parent_offset) = self.find(p);
        self.offset[x] = (self.offset[x] + parent_offset) % 4;
        self.parent[x] = root;
        (root, self.offset[x])
    }

    /// `potential(y) - potential(x)` if both are in the same component.
    pub fn relation(&mut self, x: usize, y: usize) -> Option<u8> {
        let (rx, ox) = self.find(x);
        let (ry, oy) = self.find(y);
        (rx == ry).then_some((oy + 4 - ox) % 4)
    }

    /// Records `potential(y) - potential(x) = d`. On contradiction returns the
    /// relation already implied and leaves the structure unchanged.
    pub fn union(&mut self, x: usize, y: usize, d: u8) -> Result<(), u8> {
        let d = d % 4;
        let (rx, ox) = self.find(x);
        let (ry, oy) = self.find(y);
        if rx == ry {
            let existing = (oy + 4 - ox) % 4;
            return if existing == d { Ok(()) } else { Err(existing) };
        }
        // potential(ry) - potential(rx) = ox + d - oy
        let root_delta = (ox + d + 4 - oy) % 4;
        if self.rank[rx] < self.rank[ry] {
            self.parent[rx] = ry;
            self.offset[rx] = (4 - root_delta) % 4;
        } else {
            self.parent[ry] = rx;
            self.offset[ry] = root_delta;
            if self.rank[rx] == self.rank[ry] {
                self.rank[rx] += 1;
            }
        }
        Ok(())
    }
}
