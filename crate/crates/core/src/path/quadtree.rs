//! Point quad-tree with rectangular range queries.

use crate::geom::Point2;
use crate::scalar::Scalar;

pub const NODE_CAPACITY: usize = 8;
pub const MAX_DEPTH: usize = 16;

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub min: Point2<T>,
    pub max: Point2<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min: Point2<T>, max: Point2<T>) -> Self {
        Rect { min, max }
    }

    pub fn bounding(points: impl IntoIterator<Item = Point2<T>>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(Rect::new(first, first), |r, p| {
            Rect::new(Point2::new(r.min.x.min(p.x), r.min.y.min(p.y)), Point2::new(r.max.x.max(p.x), r.max.y.max(p.y)))
        }))
    }

    #[inline]
    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    #[inline]
    pub fn intersects(&self, o: &Rect<T>) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

#[inline]
fn quadrant<T: Scalar>(mid: Point2<T>, p: Point2<T>) -> usize {
    usize::from(p.x >= mid.x) | (usize::from(p.y >= mid.y) << 1)
}

#[derive(Debug, Clone)]
struct Node<T, V> {
    bounds: Rect<T>,
    depth: usize,
    items: Vec<(Point2<T>, V)>,
    children: Option<Box<[Node<T, V>; 4]>>,
}

impl<T: Scalar, V> Node<T, V> {
    fn leaf(bounds: Rect<T>, depth: usize) -> Self {
        Node { bounds, depth, items: Vec::new(), children: None }
    }

    fn mid(&self) -> Point2<T> {
        let two = T::of(2.0);
        Point2::new((self.bounds.min.x + self.bounds.max.x) / two, (self.bounds.min.y + self.bounds.max.y) / two)
    }

    fn insert(&mut self, p: Point2<T>, v: V) {
        let mid = self.mid();
        if let Some(ch) = self.children.as_mut() {
            ch[quadrant(mid, p)].insert(p, v);
            return;
        }
        self.items.push((p, v));
        if self.items.len() > NODE_CAPACITY && self.depth < MAX_DEPTH {
            self.split();
        }
    }

    fn split(&mut self) {
        let m = self.mid();
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        let d = self.depth + 1;
        let mut ch = Box::new([
            Node::leaf(Rect::new(lo, m), d),
            Node::leaf(Rect::new(Point2::new(m.x, lo.y), Point2::new(hi.x, m.y)), d),
            Node::leaf(Rect::new(Point2::new(lo.x, m.y), Point2::new(m.x, hi.y)), d),
            Node::leaf(Rect::new(m, hi), d),
        ]);
        for (p, v) in self.items.drain(..) {
            ch[quadrant(m, p)].insert(p, v);
        }
        self.children = Some(ch);
    }

    fn query<'a>(&'a self, r: &Rect<T>, out: &mut Vec<(Point2<T>, &'a V)>) {
        if !self.bounds.intersects(r) {
            return;
        }
        match &self.children {
            Some(ch) => ch.iter().for_each(|c| c.query(r, out)),
            None => out.extend(self.items.iter().filter(|(p, _)| r.contains(*p)).map(|(p, v)| (*p, v))),
        }
    }
}

/// Quad-tree over a fixed bounding box. Leaves split past
/// [`NODE_CAPACITY`] items until [`MAX_DEPTH`].
#[derive(Debug, Clone)]
pub struct QuadTree<T, V> {
    root: Node<T, V>,
    len: usize,
}

impl<T: Scalar, V> QuadTree<T, V> {
    pub fn new(bounds: Rect<T>) -> Self {
        QuadTree { root: Node::leaf(bounds, 0), len: 0 }
    }

    /// Builds a tree sized to the given items.
    pub fn from_items(items: impl IntoIterator<Item = (Point2<T>, V)>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        let bounds = Rect::bounding(items.iter().map(|(p, _)| *p))
            .unwrap_or_else(|| Rect::new(Point2::default(), Point2::default()));
        let mut t = QuadTree::new(bounds);
        for (p, v) in items {
            t.insert(p, v);
        }
        t
    }

    pub fn bounds(&self) -> Rect<T> {
        self.root.bounds
    }

    /// Inserts a point; returns `false` (and drops it) when outside the bounds.
    pub fn insert(&mut self, p: Point2<T>, v: V) -> bool {
        if !self.root.bounds.contains(p) {
            return false;
        }
        self.root.insert(p, v);
        self.len += 1;
        true
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Every stored point inside the closed rectangle `r`.
    pub fn query(&self, r: &Rect<T>) -> Vec<(Point2<T>, &V)> {
        let mut out = Vec::new();
        self.root.query(r, &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn d<T, V>(n: &Node<T, V>) -> usize {
            n.children.as_ref().map_or(n.depth, |c| c.iter().map(d).max().unwrap())
        }
        d(&self.root)
    }
}
