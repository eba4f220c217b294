//! Incremental r-tree over axis-aligned boxes with quadratic splits.
//!
//! Entries are keyed; `upsert` replaces the box of an existing key. Overlap
//! tests use closed intervals, so boxes that only touch count as intersecting.

use std::collections::HashMap;
use std::hash::Hash;

/// Maximum entries per node.
pub const MAX_ENTRIES: usize = 8;
/// Minimum entries per non-root node.
pub const MIN_ENTRIES: usize = 2;

/// Axis-aligned box in `D` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<const D: usize> {
    pub min: [f64; D],
    pub max: [f64; D],
}

impl<const D: usize> Aabb<D> {
    /// # Panics
    /// If a coordinate is NaN or `min > max` on some axis.
    pub fn new(min: [f64; D], max: [f64; D]) -> Self {
        let b = Aabb { min, max };
        assert!(b.is_valid(), "invalid box {b:?}");
        b
    }

    /// Box of half-width `half` on every axis around `center`.
    pub fn around(center: [f64; D], half: f64) -> Self {
        Self::new(center.map(|c| c - half), center.map(|c| c + half))
    }

    pub fn is_valid(&self) -> bool {
        (0..D).all(|k| self.min[k] <= self.max[k])
    }

    /// Closed-interval overlap.
    pub fn intersects(&self, other: &Self) -> bool {
        (0..D).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    pub fn contains(&self, other: &Self) -> bool {
        (0..D).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for k in 0..D {
            out.min[k] = out.min[k].min(other.min[k]);
            out.max[k] = out.max[k].max(other.max[k]);
        }
        out
    }

    /// Product of side lengths.
    pub fn volume(&self) -> f64 {
        (0..D).map(|k| self.max[k] - self.min[k]).product()
    }

    fn enlargement(&self, other: &Self) -> f64 {
        self.union(other).volume() - self.volume()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RTreeError {
    #[error("unknown id")]
    UnknownId,
}

#[derive(Debug, Clone, Copy)]
enum Child<K> {
    Item(K),
    Node(usize),
}

#[derive(Debug, Clone)]
struct Entry<K, const D: usize> {
    bbox: Aabb<D>,
    child: Child<K>,
}

#[derive(Debug, Clone)]
struct Node<K, const D: usize> {
    parent: Option<usize>,
    leaf: bool,
    entries: Vec<Entry<K, D>>,
}

#[derive(Debug, Clone)]
pub struct RTree<K, const D: usize = 2> {
    nodes: Vec<Node<K, D>>,
    free: Vec<usize>,
    root: usize,
    /// Leaf node holding each key.
    index: HashMap<K, usize>,
}

impl<K: Copy + Eq + Hash + Ord, const D: usize> Default for RTree<K, D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Copy + Eq + Hash + Ord, const D: usize> RTree<K, D> {
    pub fn new() -> Self {
        RTree {
            nodes: vec![Node {
                parent: None,
                leaf: true,
                entries: Vec::new(),
            }],
            free: Vec::new(),
            root: 0,
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, key: K) -> bool {
        self.index.contains_key(&key)
    }

    pub fn get(&self, key: K) -> Option<Aabb<D>> {
        let leaf = *self.index.get(&key)?;
        let slot = self.item_slot(leaf, key);
        Some(self.nodes[leaf].entries[slot].bbox)
    }

    /// Inserts `key` or replaces its box.
    pub fn upsert(&mut self, key: K, bbox: Aabb<D>) {
        debug_assert!(bbox.is_valid());
        if let Some(&leaf) = self.index.get(&key) {
            // in place when the enclosing parent box still covers the new box
            let fits = match self.nodes[leaf].parent {
                None => true,
                Some(p) => self.nodes[p].entries[self.node_slot(p, leaf)].bbox.contains(&bbox),
            };
            if fits {
                let slot = self.item_slot(leaf, key);
                self.nodes[leaf].entries[slot].bbox = bbox;
                return;
            }
            self.remove(key).expect("indexed key");
        }
        let leaf = self.choose_leaf(&bbox);
        self.insert_into(
            leaf,
            Entry {
                bbox,
                child: Child::Item(key),
            },
        );
    }

    pub fn remove(&mut self, key: K) -> Result<Aabb<D>, RTreeError> {
        let leaf = self.index.remove(&key).ok_or(RTreeError::UnknownId)?;
        let slot = self.item_slot(leaf, key);
        let bbox = self.nodes[leaf].entries.swap_remove(slot).bbox;
        let mut orphans = Vec::new();
        let mut node = leaf;
        while let Some(p) = self.nodes[node].parent {
            let slot = self.node_slot(p, node);
            if self.nodes[node].entries.len() < MIN_ENTRIES {
                self.nodes[p].entries.swap_remove(slot);
                self.dissolve(node, &mut orphans);
            } else {
                self.nodes[p].entries[slot].bbox = self.cover(node);
            }
            node = p;
        }
        loop {
            let root = &self.nodes[self.root];
            if root.leaf {
                break;
            }
            match root.entries.len() {
                0 => {
                    self.nodes[self.root].leaf = true;
                    break;
                }
                1 => {
                    let Child::Node(child) = root.entries[0].child else {
                        unreachable!("internal node holds nodes")
                    };
                    self.release(self.root);
                    self.nodes[child].parent = None;
                    self.root = child;
                }
                _ => break,
            }
        }
        for (k, b) in orphans {
            let leaf = self.choose_leaf(&b);
            self.insert_into(
                leaf,
                Entry {
                    bbox: b,
                    child: Child::Item(k),
                },
            );
        }
        Ok(bbox)
    }

    /// Keys whose boxes intersect `query`, in ascending order.
    pub fn query(&self, query: &Aabb<D>) -> Vec<K> {
        let mut out = Vec::new();
        self.visit(query, |k, _| out.push(k));
        out.sort();
        out
    }

    /// Every unordered pair of intersecting entries as `(a, b)` with `a < b`,
    /// sorted.
    pub fn query_pairs(&self) -> Vec<(K, K)> {
        let mut out = Vec::new();
        for node in self.live_nodes().filter(|n| n.leaf) {
            for e in &node.entries {
                let Child::Item(a) = e.child else { continue };
                self.visit(&e.bbox, |b, _| {
                    if a < b {
                        out.push((a, b));
                    }
                });
            }
        }
        out.sort();
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (K, Aabb<D>)> + '_ {
        self.live_nodes()
            .filter(|n| n.leaf)
            .flat_map(|n| n.entries.iter())
            .filter_map(|e| match e.child {
                Child::Item(k) => Some((k, e.bbox)),
                Child::Node(_) => None,
            })
    }

    /// Height of the tree; a lone leaf root has height 1.
    pub fn height(&self) -> usize {
        let mut h = 1;
        let mut node = self.root;
        while !self.nodes[node].leaf {
            let Child::Node(c) = self.nodes[node].entries[0].child else {
                unreachable!()
            };
            node = c;
            h += 1;
        }
        h
    }

    /// Checks fanout bounds, box containment, uniform leaf depth, parent links
    /// and the key index.
    pub fn validate(&self) -> Result<(), String> {
        let mut leaf_depth = None;
        let mut seen = 0;
        let mut stack = vec![(self.root, None::<Aabb<D>>, 0usize)];
        if self.nodes[self.root].parent.is_some() {
            return Err("root has a parent".into());
        }
        while let Some((id, bound, depth)) = stack.pop() {
            let node = &self.nodes[id];
            let n = node.entries.len();
            if n > MAX_ENTRIES {
                return Err(format!("node {id} holds {n} entries"));
            }
            if id != self.root && n < MIN_ENTRIES {
                return Err(format!("node {id} underfull with {n} entries"));
            }
            if id == self.root && !node.leaf && n < 2 {
                return Err("internal root with fewer than two children".into());
            }
            for e in &node.entries {
                if !e.bbox.is_valid() {
                    return Err(format!("invalid box in node {id}"));
                }
                if let Some(b) = bound {
                    if !b.contains(&e.bbox) {
                        return Err(format!("node {id} escapes its parent box"));
                    }
                }
                match (node.leaf, e.child) {
                    (true, Child::Item(k)) => {
                        seen += 1;
                        if self.index.get(&k) != Some(&id) {
                            return Err(format!("index disagrees for an entry of node {id}"));
                        }
                    }
                    (false, Child::Node(c)) => {
                        if self.nodes[c].parent != Some(id) {
                            return Err(format!("node {c} has a stale parent link"));
                        }
                        stack.push((c, Some(e.bbox), depth + 1));
                    }
                    _ => return Err(format!("node {id} mixes items and nodes")),
                }
            }
            if node.leaf {
                match leaf_depth {
                    None => leaf_depth = Some(depth),
                    Some(d) if d != depth => return Err("leaves at different depths".into()),
                    _ => {}
                }
            }
        }
        if seen != self.index.len() {
            return Err(format!("{seen} entries but {} indexed keys", self.index.len()));
        }
        Ok(())
    }

    fn live_nodes(&self) -> impl Iterator<Item = &Node<K, D>> + '_ {
        let mut stack = vec![self.root];
        std::iter::from_fn(move || {
            let id = stack.pop()?;
            let node = &self.nodes[id];
            if !node.leaf {
                stack.extend(node.entries.iter().filter_map(|e| match e.child {
                    Child::Node(c) => Some(c),
                    Child::Item(_) => None,
                }));
            }
            Some(node)
        })
    }

    fn visit(&self, query: &Aabb<D>, mut f: impl FnMut(K, &Aabb<D>)) {
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            for e in &self.nodes[id].entries {
                if e.bbox.intersects(query) {
                    match e.child {
                        Child::Item(k) => f(k, &e.bbox),
                        Child::Node(c) => stack.push(c),
                    }
                }
            }
        }
    }

    fn item_slot(&self, leaf: usize, key: K) -> usize {
        self.nodes[leaf]
            .entries
            .iter()
            .position(|e| matches!(e.child, Child::Item(k) if k == key))
            .expect("index points at the key's leaf")
    }

    fn node_slot(&self, parent: usize, child: usize) -> usize {
        self.nodes[parent]
            .entries
            .iter()
            .position(|e| matches!(e.child, Child::Node(c) if c == child))
            .expect("parent link is consistent")
    }

    fn cover(&self, node: usize) -> Aabb<D> {
        let entries = &self.nodes[node].entries;
        entries[1..].iter().fold(entries[0].bbox, |acc, e| acc.union(&e.bbox))
    }

    fn alloc(&mut self, node: Node<K, D>) -> usize {
        match self.free.pop() {
            Some(id) => {
                self.nodes[id] = node;
                id
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    fn release(&mut self, id: usize) {
        self.nodes[id].entries.clear();
        self.nodes[id].parent = None;
        self.free.push(id);
    }

    /// Frees a detached subtree, collecting its items.
    fn dissolve(&mut self, id: usize, items: &mut Vec<(K, Aabb<D>)>) {
        let entries = std::mem::take(&mut self.nodes[id].entries);
        for e in entries {
            match e.child {
                Child::Item(k) => items.push((k, e.bbox)),
                Child::Node(c) => self.dissolve(c, items),
            }
        }
        self.release(id);
    }

    fn choose_leaf(&self, bbox: &Aabb<D>) -> usize {
        let mut node = self.root;
        while !self.nodes[node].leaf {
            let best = self.nodes[node]
                .entries
                .iter()
                .min_by(|a, b| {
                    a.bbox
                        .enlargement(bbox)
                        .total_cmp(&b.bbox.enlargement(bbox))
                        .then(a.bbox.volume().total_cmp(&b.bbox.volume()))
                })
                .expect("internal nodes are non-empty");
            let Child::Node(c) = best.child else { unreachable!() };
            node = c;
        }
        node
    }

    fn adopt(&mut self, node: usize, child: Child<K>) {
        match child {
            Child::Item(k) => {
                self.index.insert(k, node);
            }
            Child::Node(c) => self.nodes[c].parent = Some(node),
        }
    }

    fn insert_into(&mut self, target: usize, entry: Entry<K, D>) {
        let child = entry.child;
        self.nodes[target].entries.push(entry);
        self.adopt(target, child);
        let mut node = target;
        loop {
            if self.nodes[node].entries.len() <= MAX_ENTRIES {
                self.refresh_up(node);
                return;
            }
            let sibling = self.split(node);
            match self.nodes[node].parent {
                None => {
                    let entries = vec![
                        Entry {
                            bbox: self.cover(node),
                            child: Child::Node(node),
                        },
                        Entry {
                            bbox: self.cover(sibling),
                            child: Child::Node(sibling),
                        },
                    ];
                    let root = self.alloc(Node {
                        parent: None,
                        leaf: false,
                        entries,
                    });
                    self.nodes[node].parent = Some(root);
                    self.nodes[sibling].parent = Some(root);
                    self.root = root;
                    return;
                }
                Some(p) => {
                    let slot = self.node_slot(p, node);
                    self.nodes[p].entries[slot].bbox = self.cover(node);
                    let bbox = self.cover(sibling);
                    self.nodes[p].entries.push(Entry {
                        bbox,
                        child: Child::Node(sibling),
                    });
                    self.nodes[sibling].parent = Some(p);
                    node = p;
                }
            }
        }
    }

    /// Grows ancestor boxes to cover `node`.
    fn refresh_up(&mut self, mut node: usize) {
        while let Some(p) = self.nodes[node].parent {
            let slot = self.node_slot(p, node);
            let cover = self.cover(node);
            let current = &mut self.nodes[p].entries[slot].bbox;
            if current.contains(&cover) {
                return;
            }
            *current = current.union(&cover);
            node = p;
        }
    }

    /// Quadratic split; `node` keeps one group and a new sibling gets the other.
    fn split(&mut self, node: usize) -> usize {
        let mut rest = std::mem::take(&mut self.nodes[node].entries);
        let (mut s1, mut s2, mut worst) = (0, 1, f64::NEG_INFINITY);
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                let waste = rest[i].bbox.union(&rest[j].bbox).volume() - rest[i].bbox.volume() - rest[j].bbox.volume();
                if waste > worst {
                    (s1, s2, worst) = (i, j, waste);
                }
            }
        }
        let b = rest.swap_remove(s2);
        let a = rest.swap_remove(s1);
        let (mut cover_a, mut cover_b) = (a.bbox, b.bbox);
        let (mut group_a, mut group_b) = (vec![a], vec![b]);
        while !rest.is_empty() {
            if group_a.len() + rest.len() == MIN_ENTRIES {
                group_a.append(&mut rest);
                break;
            }
            if group_b.len() + rest.len() == MIN_ENTRIES {
                group_b.append(&mut rest);
                break;
            }
            let (pick, _) = rest
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let d = cover_a.enlargement(&e.bbox) - cover_b.enlargement(&e.bbox);
                    (i, d.abs())
                })
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty");
            let e = rest.swap_remove(pick);
            let (da, db) = (cover_a.enlargement(&e.bbox), cover_b.enlargement(&e.bbox));
            let to_a = match da.total_cmp(&db) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => match cover_a.volume().total_cmp(&cover_b.volume()) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => group_a.len() <= group_b.len(),
                },
            };
            if to_a {
                cover_a = cover_a.union(&e.bbox);
                group_a.push(e);
            } else {
                cover_b = cover_b.union(&e.bbox);
                group_b.push(e);
            }
        }
        let leaf = self.nodes[node].leaf;
        let parent = self.nodes[node].parent;
        self.nodes[node].entries = group_a;
        let sibling = self.alloc(Node {
            parent,
            leaf,
            entries: Vec::new(),
        });
        for e in group_b {
            let child = e.child;
            self.nodes[sibling].entries.push(e);
            self.adopt(sibling, child);
        }
        sibling
    }
}
