//! Sphere octree for proximity and collision queries.

use thiserror::Error;

use super::ScaleParams;
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum OctreeError {
    #[error("item {id} at {center:?} lies outside the octree bounds")]
    OutOfBounds { id: usize, center: [f64; 3] },
    #[error("invalid octree bounds")]
    Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctreeItem {
    pub id: usize,
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone)]
struct Node {
    lo: Vec3,
    hi: Vec3,
    items: Vec<OctreeItem>,
    children: Option<Box<[Node; 8]>>,
    /// Largest item radius anywhere in this subtree.
    max_radius: f64,
}

impl Node {
    fn new(lo: Vec3, hi: Vec3) -> Self {
        Self { lo, hi, items: Vec::new(), children: None, max_radius: 0.0 }
    }

    fn octant(&self, p: &Vec3) -> usize {
        let mid = (self.lo + self.hi) / 2.0;
        (p.x >= mid.x) as usize | ((p.y >= mid.y) as usize) << 1 | ((p.z >= mid.z) as usize) << 2
    }

    fn split(&mut self) {
        let mid = (self.lo + self.hi) / 2.0;
        let children: [Node; 8] = std::array::from_fn(|o| {
            let pick = |bit: usize, axis: usize| if o >> bit & 1 == 1 { (mid[axis], self.hi[axis]) } else { (self.lo[axis], mid[axis]) };
            let (x0, x1) = pick(0, 0);
            let (y0, y1) = pick(1, 1);
            let (z0, z1) = pick(2, 2);
            Node::new(Vec3::new(x0, y0, z0), Vec3::new(x1, y1, z1))
        });
        self.children = Some(Box::new(children));
        for item in std::mem::take(&mut self.items) {
            let o = self.octant(&item.center);
            let child = &mut self.children.as_mut().unwrap()[o];
            child.max_radius = child.max_radius.max(item.radius);
            child.items.push(item);
        }
    }

    /// Squared distance from `p` to this node's box.
    fn box_distance2(&self, p: &Vec3) -> f64 {
        (0..3)
            .map(|a| {
                let d = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
                d * d
            })
            .sum()
    }
}

/// Point-region octree over sphere centers. Each node tracks the largest
/// radius below it so queries can prune by `distance > reach + max_radius`.
#[derive(Debug, Clone)]
pub struct Octree {
    root: Node,
    max_depth: usize,
    leaf_capacity: usize,
    len: usize,
}

impl Octree {
    pub fn new(lo: Vec3, hi: Vec3, max_depth: usize, leaf_capacity: usize) -> Result<Self, OctreeError> {
        if !(0..3).all(|a| lo[a].is_finite() && hi[a].is_finite() && lo[a] <= hi[a]) {
            return Err(OctreeError::Bounds);
        }
        Ok(Self { root: Node::new(lo, hi), max_depth, leaf_capacity: leaf_capacity.max(1), len: 0 })
    }

    /// Octree with depth and capacity from the scale laws.
    pub fn for_scale(lo: Vec3, hi: Vec3, scale: &ScaleParams) -> Result<Self, OctreeError> {
        Self::new(lo, hi, scale.octree_max_depth(), scale.octree_leaf_capacity())
    }

    pub fn build(items: &[OctreeItem], lo: Vec3, hi: Vec3, scale: &ScaleParams) -> Result<Self, OctreeError> {
        let mut tree = Self::for_scale(lo, hi, scale)?;
        for item in items {
            tree.insert(*item)?;
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Deepest populated level, root = 0.
    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            n.children.as_ref().map_or(0, |c| 1 + c.iter().map(walk).max().unwrap_or(0))
        }
        walk(&self.root)
    }

    pub fn insert(&mut self, item: OctreeItem) -> Result<(), OctreeError> {
        let inside = (0..3).all(|a| item.center[a] >= self.root.lo[a] && item.center[a] <= self.root.hi[a]);
        if !inside || !item.radius.is_finite() {
            return Err(OctreeError::OutOfBounds { id: item.id, center: [item.center.x, item.center.y, item.center.z] });
        }
        let mut node = &mut self.root;
        let mut depth = 0;
        loop {
            node.max_radius = node.max_radius.max(item.radius);
            if node.children.is_none() {
                if node.items.len() < self.leaf_capacity || depth >= self.max_depth {
                    node.items.push(item);
                    self.len += 1;
                    return Ok(());
                }
                node.split();
            }
            let o = node.octant(&item.center);
            node = &mut node.children.as_mut().unwrap()[o];
            depth += 1;
        }
    }

    /// Ids of every item whose sphere intersects (or touches) the query sphere.
    pub fn query_near(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(center, radius, 1.0, &mut |item| {
            out.push(item.id);
            false
        });
        out
    }

    /// True when some item lies strictly closer than `factor * (radius + r_item)`.
    pub fn any_closer_than(&self, center: &Vec3, radius: f64, factor: f64) -> bool {
        let mut found = false;
        self.visit_strict(center, radius, factor, &mut |_| {
            found = true;
            true
        });
        found
    }

    fn visit(&self, center: &Vec3, radius: f64, factor: f64, f: &mut dyn FnMut(&OctreeItem) -> bool) {
        self.walk(&self.root, center, radius, factor, false, f);
    }

    fn visit_strict(&self, center: &Vec3, radius: f64, factor: f64, f: &mut dyn FnMut(&OctreeItem) -> bool) {
        self.walk(&self.root, center, radius, factor, true, f);
    }

    /// Returns true when the callback asked to stop.
    fn walk(
        &self,
        node: &Node,
        center: &Vec3,
        radius: f64,
        factor: f64,
        strict: bool,
        f: &mut dyn FnMut(&OctreeItem) -> bool,
    ) -> bool {
        let reach = factor * (radius + node.max_radius);
        if node.box_distance2(center) > reach * reach {
            return false;
        }
        for item in &node.items {
            let limit = factor * (radius + item.radius);
            let d2 = (item.center - center).norm_squared();
            let hit = if strict { d2 < limit * limit } else { d2 <= limit * limit };
            if hit && f(item) {
                return true;
            }
        }
        if let Some(children) = &node.children {
            for child in children.iter() {
                if self.walk(child, center, radius, factor, strict, f) {
                    return true;
                }
            }
        }
        false
    }
}
