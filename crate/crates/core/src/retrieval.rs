//! Map-corpus retrieval: a hand-crafted 128-dim geometric scene descriptor,
//! a hierarchical k-means vocabulary tree over a tile corpus, and top-k
//! queries by descriptor distance.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::RetrievalError;
use crate::geometry::{BBox, Point2};
use crate::physics::circumradius;
use crate::scene::{load_scene, Scene};

pub const DESCRIPTOR_DIM: usize = 128;
const ORIENT_BINS: usize = 8;
const RADIAL_BINS: usize = 4;
const CURV_BINS: usize = 4;

pub const DEFAULT_BRANCHING: usize = 10;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_TOP_K: usize = 10;

/// Tile crops may span at most this many meters per side.
pub const MAX_TILE_EXTENT: f64 = 200.0;

const KMEANS_ITERS: usize = 20;
const INDEX_VERSION: u32 = 1;

/// L2-normalized 128-dim histogram over (orientation x radial distance x
/// curvature) bins of the resampled lane points. A scene with no mass maps
/// to the zero vector, visible via [`SceneDescriptor::is_zero`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub values: Vec<f64>,
}

impl SceneDescriptor {
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn distance(&self, other: &SceneDescriptor) -> f64 {
        dist(&self.values, &other.values)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Deterministic geometric descriptor. Lanes are resampled at 1 m; each
/// point contributes one count to the joint histogram of its tangent
/// orientation (8 bins), absolute distance from the scene centroid
/// (4 bins), and discrete curvature (4 bins). The orientation axis is
/// circularly shifted so the dominant bin lands at index 0, making the
/// descriptor rotation-invariant up to binning.
pub fn scene_descriptor(scene: &Scene) -> Result<SceneDescriptor, RetrievalError> {
    if scene.lanes.is_empty() {
        return Err(RetrievalError::EmptyScene);
    }
    let lanes: Vec<Vec<Point2>> = scene
        .lanes
        .iter()
        .map(|l| l.resample(1.0).points().to_vec())
        .collect();

    let mut centroid = Point2::new(0.0, 0.0);
    let mut count = 0usize;
    for lane in &lanes {
        for p in lane {
            centroid = centroid + *p;
            count += 1;
        }
    }
    if count == 0 {
        return Err(RetrievalError::EmptyScene);
    }
    centroid = centroid * (1.0 / count as f64);

    let mut hist = vec![0.0f64; DESCRIPTOR_DIM];
    for lane in &lanes {
        let n = lane.len();
        for i in 0..n {
            let tangent = if i + 1 < n {
                lane[i + 1] - lane[i]
            } else {
                lane[n - 1] - lane[n - 2]
            };
            let mut theta = tangent.y.atan2(tangent.x);
            if theta < 0.0 {
                theta += std::f64::consts::TAU;
            }
            let o = ((theta / (std::f64::consts::TAU / ORIENT_BINS as f64)) as usize)
                .min(ORIENT_BINS - 1);

            let r = radial_bin(lane[i].distance(centroid));

            let kappa = if i == 0 || i + 1 >= n {
                0.0
            } else {
                match circumradius(lane[i - 1], lane[i], lane[i + 1]) {
                    Ok(radius) if radius.is_finite() => 1.0 / radius,
                    _ => 0.0,
                }
            };
            let c = curvature_bin(kappa);

            hist[(o * RADIAL_BINS + r) * CURV_BINS + c] += 1.0;
        }
    }

    // Canonical rotation: dominant orientation bin -> index 0.
    let mut marginal = [0.0f64; ORIENT_BINS];
    for o in 0..ORIENT_BINS {
        for j in 0..RADIAL_BINS * CURV_BINS {
            marginal[o] += hist[o * RADIAL_BINS * CURV_BINS + j];
        }
    }
    let dominant = marginal
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.partial_cmp(b).unwrap().then(j.cmp(i)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut shifted = vec![0.0f64; DESCRIPTOR_DIM];
    let block = RADIAL_BINS * CURV_BINS;
    for o in 0..ORIENT_BINS {
        let new_o = (o + ORIENT_BINS - dominant) % ORIENT_BINS;
        shifted[new_o * block..(new_o + 1) * block]
            .copy_from_slice(&hist[o * block..(o + 1) * block]);
    }

    let norm = shifted.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut shifted {
            *v /= norm;
        }
    }
    Ok(SceneDescriptor { values: shifted })
}

/// Absolute distance-from-centroid bins sized for 200 m tile crops. Absolute
/// edges keep tiles of different spatial extent distinguishable.
fn radial_bin(d: f64) -> usize {
    if d < 15.0 {
        0
    } else if d < 35.0 {
        1
    } else if d < 65.0 {
        2
    } else {
        3
    }
}

fn curvature_bin(kappa: f64) -> usize {
    // Radii above 100 m count as straight; 40 m and 15 m split the rest.
    if kappa < 1.0 / 100.0 {
        0
    } else if kappa < 1.0 / 40.0 {
        1
    } else if kappa < 1.0 / 15.0 {
        2
    } else {
        3
    }
}

/// One indexed map tile.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub tile: Scene,
    pub location: Option<String>,
}

/// Loads every `*.json` tile in a directory (sorted by file name) and
/// validates the tile extent.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>, RetrievalError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let (id, tile, location) = load_scene(&path)?;
        let mut bbox = BBox::empty();
        for lane in &tile.lanes {
            bbox.include_all(lane.points());
        }
        if bbox.width() > MAX_TILE_EXTENT || bbox.height() > MAX_TILE_EXTENT {
            return Err(RetrievalError::TileTooLarge {
                id,
                max: MAX_TILE_EXTENT,
                w: bbox.width(),
                h: bbox.height(),
            });
        }
        entries.push(CorpusEntry { id, tile, location });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafEntry {
    pub id: String,
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Node {
    Internal {
        centroid: Vec<f64>,
        children: Vec<Node>,
    },
    Leaf {
        centroid: Vec<f64>,
        bucket: Vec<LeafEntry>,
    },
}

/// Hierarchical k-means index: `branching` clusters per node down to
/// `depth` levels, entries stored in the leaves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabTree {
    pub branching: usize,
    pub depth: usize,
    root: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryHit {
    pub id: String,
    pub distance: f64,
}

pub fn build_vocab_tree(
    entries: &[(String, SceneDescriptor)],
    branching: usize,
    depth: usize,
    seed: u64,
) -> Result<VocabTree, RetrievalError> {
    assert!(branching >= 2 && depth >= 1);
    if entries.len() < branching {
        return Err(RetrievalError::CorpusTooSmall {
            got: entries.len(),
            branching,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<LeafEntry> = entries
        .iter()
        .map(|(id, d)| LeafEntry {
            id: id.clone(),
            descriptor: d.values.clone(),
        })
        .collect();
    let root_centroid = mean_of(&items);
    let root = split_node(items, root_centroid, branching, depth, &mut rng);
    Ok(VocabTree {
        branching,
        depth,
        root,
    })
}

fn mean_of(items: &[LeafEntry]) -> Vec<f64> {
    let mut c = vec![0.0f64; DESCRIPTOR_DIM];
    for item in items {
        for (acc, v) in c.iter_mut().zip(&item.descriptor) {
            *acc += v;
        }
    }
    let n = items.len().max(1) as f64;
    for v in &mut c {
        *v /= n;
    }
    c
}

/// `centroid` is the routing center the node was clustered under during the
/// build; queries descend by it, so an indexed descriptor always reaches its
/// own leaf again.
fn split_node(
    items: Vec<LeafEntry>,
    centroid: Vec<f64>,
    branching: usize,
    levels_left: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    if levels_left == 0 || items.len() <= branching {
        return Node::Leaf {
            centroid,
            bucket: items,
        };
    }
    let clusters = kmeans(&items, branching, rng);
    let children = clusters
        .into_iter()
        .map(|(center, bucket)| split_node(bucket, center, branching, levels_left - 1, rng))
        .collect();
    Node::Internal { centroid, children }
}

/// Plain Lloyd iterations with k-means++ style seeding. Empty clusters are
/// reseeded from the point farthest from its assigned center. The returned
/// buckets are assigned under the returned centers (one final assignment
/// pass), so routing by nearest center reproduces the partition exactly.
fn kmeans(items: &[LeafEntry], k: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, Vec<LeafEntry>)> {
    let n = items.len();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(items[rng.gen_range(0..n)].descriptor.clone());
    let mut d2: Vec<f64> = items
        .iter()
        .map(|it| dist(&it.descriptor, &centers[0]).powi(2))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= *w;
            }
            chosen
        };
        centers.push(items[idx].descriptor.clone());
        for (i, it) in items.iter().enumerate() {
            d2[i] = d2[i].min(dist(&it.descriptor, centers.last().unwrap()).powi(2));
        }
    }

    let assign_all = |centers: &[Vec<f64>]| -> Vec<usize> {
        items
            .iter()
            .map(|it| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = dist(&it.descriptor, center);
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignment = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        let new_assignment = assign_all(&centers);
        let changed = new_assignment != assignment;
        assignment = new_assignment;

        // Rebuild centers; reseed empties from the worst-fitting point.
        let mut sums = vec![vec![0.0f64; DESCRIPTOR_DIM]; k];
        let mut counts = vec![0usize; k];
        for (i, it) in items.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (acc, v) in sums[assignment[i]].iter_mut().zip(&it.descriptor) {
                *acc += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist(&items[a].descriptor, &centers[assignment[a]]);
                        let db = dist(&items[b].descriptor, &centers[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = items[far].descriptor.clone();
                assignment[far] = c;
            } else {
                for (j, v) in centers[c].iter_mut().enumerate() {
                    *v = sums[c][j] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Final assignment under the final centers keeps routing exact.
    let assignment = assign_all(&centers);
    let mut clusters: Vec<(Vec<f64>, Vec<LeafEntry>)> =
        centers.into_iter().map(|c| (c, Vec::new())).collect();
    for (i, it) in items.iter().enumerate() {
        clusters[assignment[i]].1.push(it.clone());
    }
    clusters.retain(|(_, bucket)| !bucket.is_empty());
    clusters
}

fn node_centroid(node: &Node) -> &[f64] {
    match node {
        Node::Internal { centroid, .. } | Node::Leaf { centroid, .. } => centroid,
    }
}

impl VocabTree {
    /// Descends to the query's leaf via the nearest routing center per
    /// level; when the leaf holds fewer than `k` members, backtracks through
    /// the remaining leaves in order of centroid distance until `k` are
    /// gathered (or the corpus is exhausted). Gathered members are ranked by
    /// exact descriptor distance. Because the descent mirrors how entries
    /// were assigned during the build, an indexed descriptor always finds
    /// its own leaf first.
    pub fn query_descriptor(
        &self,
        q: &SceneDescriptor,
        k: usize,
    ) -> Result<Vec<QueryHit>, RetrievalError> {
        let mut gathered: Vec<&LeafEntry> = Vec::new();
        // Siblings passed over during the descent, available for backtracking.
        let mut frontier: Vec<(f64, &Node)> = Vec::new();

        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { bucket, .. } => {
                    gathered.extend(bucket.iter());
                    break;
                }
                Node::Internal { children, .. } => {
                    let nearest = children
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            dist(&q.values, node_centroid(a))
                                .partial_cmp(&dist(&q.values, node_centroid(b)))
                                .unwrap()
                        })
                        .map(|(i, _)| i)
                        .expect("internal node has children");
                    for (i, child) in children.iter().enumerate() {
                        if i != nearest {
                            frontier.push((dist(&q.values, node_centroid(child)), child));
                        }
                    }
                    node = &children[nearest];
                }
            }
        }

        while gathered.len() < k && !frontier.is_empty() {
            let best = frontier
                .iter()
                .enumerate()
                .min_by(|(_, (a, _)), (_, (b, _))| a.partial_cmp(b).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let (_, node) = frontier.swap_remove(best);
            match node {
                Node::Leaf { bucket, .. } => gathered.extend(bucket.iter()),
                Node::Internal { children, .. } => {
                    for child in children {
                        frontier.push((dist(&q.values, node_centroid(child)), child));
                    }
                }
            }
        }
        if gathered.is_empty() {
            return Err(RetrievalError::EmptyTree);
        }
        let mut hits: Vec<QueryHit> = gathered
            .into_iter()
            .map(|e| QueryHit {
                id: e.id.clone(),
                distance: dist(&q.values, &e.descriptor),
            })
            .collect();
        hits.sort_by(|a, b| {
            a.distance
                .partial_cmp(&b.distance)
                .unwrap()
                .then(a.id.cmp(&b.id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Leaf buckets in depth-first order (tests use this to check the
    /// partition property).
    pub fn leaf_buckets(&self) -> Vec<&[LeafEntry]> {
        fn walk<'a>(node: &'a Node, out: &mut Vec<&'a [LeafEntry]>) {
            match node {
                Node::Leaf { bucket, .. } => out.push(bucket),
                Node::Internal { children, .. } => {
                    for c in children {
                        walk(c, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Top-k tiles for a query scene.
pub fn query(tree: &VocabTree, scene: &Scene, k: usize) -> Result<Vec<QueryHit>, RetrievalError> {
    let d = scene_descriptor(scene)?;
    tree.query_descriptor(&d, k)
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    tree: VocabTree,
}

pub fn save_index(tree: &VocabTree, path: &Path) -> Result<(), RetrievalError> {
    let file = IndexFile {
        version: INDEX_VERSION,
        tree: tree.clone(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<VocabTree, RetrievalError> {
    let text = std::fs::read_to_string(path)?;
    let file: IndexFile = serde_json::from_str(&text)?;
    if file.version != INDEX_VERSION {
        return Err(RetrievalError::UnsupportedVersion(file.version));
    }
    Ok(file.tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polyline;

    fn straight_scene() -> Scene {
        let lane = Polyline::new(vec![Point2::new(-40.0, 3.0), Point2::new(55.0, 3.0)]).unwrap();
        Scene::new(vec![lane], vec![], 3.5)
    }

    fn arc_scene(radius: f64) -> Scene {
        let pts: Vec<Point2> = (0..=100)
            .map(|i| {
                let phi = 1.8 * i as f64 / 100.0;
                Point2::new(radius * phi.sin(), radius * (1.0 - phi.cos()))
            })
            .collect();
        Scene::new(vec![Polyline::new(pts).unwrap()], vec![], 3.5)
    }

    fn rotate_scene(scene: &Scene, angle: f64) -> Scene {
        let pose = crate::geometry::Pose::new(Point2::new(0.0, 0.0), angle);
        scene.map_points(|p| pose.apply(p))
    }

    #[test]
    fn straight_lane_concentrates_mass() {
        let d = scene_descriptor(&straight_scene()).unwrap();
        assert_eq!(d.values.len(), DESCRIPTOR_DIM);
        let norm: f64 = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        // All mass in orientation block 0 (canonicalized) and curvature bin 0.
        let block = RADIAL_BINS * CURV_BINS;
        for (i, v) in d.values.iter().enumerate() {
            if *v > 0.0 {
                assert!(i < block, "mass outside dominant orientation block at {i}");
                assert_eq!(i % CURV_BINS, 0, "curved mass for a straight lane at {i}");
            }
        }
    }

    #[test]
    fn rotation_by_quarter_turn_is_canonicalized_away() {
        // Two arms of unequal length make the dominant bin unique.
        let arm_a: Vec<Point2> = (0..=60)
            .map(|i| {
                let t = i as f64;
                Point2::new(
                    t * (10f64.to_radians().cos()),
                    t * (10f64.to_radians().sin()),
                )
            })
            .collect();
        let arm_b: Vec<Point2> = (0..=25)
            .map(|i| {
                let t = i as f64;
                Point2::new(
                    t * (55f64.to_radians().cos()),
                    t * (55f64.to_radians().sin()),
                )
            })
            .collect();
        let scene = Scene::new(
            vec![Polyline::new(arm_a).unwrap(), Polyline::new(arm_b).unwrap()],
            vec![],
            3.5,
        );
        let d0 = scene_descriptor(&scene).unwrap();
        let d90 = scene_descriptor(&rotate_scene(&scene, std::f64::consts::FRAC_PI_2)).unwrap();
        assert!(d0.distance(&d90) < 1e-9, "distance {}", d0.distance(&d90));
    }

    #[test]
    fn curvature_separates_scenes() {
        let d_straight = scene_descriptor(&straight_scene()).unwrap();
        let d_arc = scene_descriptor(&arc_scene(20.0)).unwrap();
        assert!(d_straight.distance(&d_arc) > 0.1);
    }

    #[test]
    fn empty_scene_rejected() {
        let scene = Scene::new(vec![], vec![], 3.5);
        assert!(matches!(
            scene_descriptor(&scene),
            Err(RetrievalError::EmptyScene)
        ));
    }

    fn blob_descriptors() -> Vec<(String, SceneDescriptor)> {
        // 10 well-separated blobs of 100 descriptors each: blob b puts its
        // mass around coordinate b with a small deterministic jitter.
        let mut out = Vec::new();
        for b in 0..10usize {
            for i in 0..100usize {
                let mut v = vec![0.0f64; DESCRIPTOR_DIM];
                v[b * 12] = 10.0;
                v[b * 12 + 1] = 1.0 + 0.001 * i as f64;
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in &mut v {
                    *x /= norm;
                }
                out.push((format!("b{b}i{i}"), SceneDescriptor { values: v }));
            }
        }
        out
    }

    #[test]
    fn planted_blobs_split_one_per_leaf() {
        let entries = blob_descriptors();
        let tree = build_vocab_tree(&entries, 10, 1, 42).unwrap();
        let buckets = tree.leaf_buckets();
        assert_eq!(buckets.len(), 10);
        for bucket in buckets {
            assert_eq!(bucket.len(), 100);
            let blob_of = |id: &str| id[1..2].to_string();
            let first = blob_of(&bucket[0].id);
            assert!(bucket.iter().all(|e| blob_of(&e.id) == first));
        }
    }

    #[test]
    fn tree_partitions_corpus_and_is_deterministic() {
        let entries = blob_descriptors();
        let tree_a = build_vocab_tree(&entries, 10, 2, 7).unwrap();
        let tree_b = build_vocab_tree(&entries, 10, 2, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&tree_a).unwrap(),
            serde_json::to_string(&tree_b).unwrap()
        );
        let mut ids: Vec<String> = tree_a
            .leaf_buckets()
            .iter()
            .flat_map(|b| b.iter().map(|e| e.id.clone()))
            .collect();
        ids.sort();
        let mut expected: Vec<String> = entries.iter().map(|(id, _)| id.clone()).collect();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn corpus_equal_to_branching_fits_one_per_child() {
        let entries: Vec<(String, SceneDescriptor)> =
            blob_descriptors().into_iter().step_by(100).collect();
        assert_eq!(entries.len(), 10);
        let tree = build_vocab_tree(&entries, 10, 1, 3).unwrap();
        // n == branching stops splitting and keeps one leaf of 10.
        let buckets = tree.leaf_buckets();
        let total: usize = buckets.iter().map(|b| b.len()).sum();
        assert_eq!(total, 10);

        let too_small: Vec<_> = entries.into_iter().take(5).collect();
        assert!(build_vocab_tree(&too_small, 10, 1, 3).is_err());
    }

    #[test]
    fn self_retrieval_and_oversized_k() {
        let entries = blob_descriptors();
        let tree = build_vocab_tree(&entries, 10, 2, 11).unwrap();
        for (id, d) in entries.iter().step_by(37) {
            let hits = tree.query_descriptor(d, 10).unwrap();
            assert_eq!(&hits[0].id, id);
            assert!(hits[0].distance <= 1e-9);
        }
        let all = tree
            .query_descriptor(&entries[0].1, entries.len() + 50)
            .unwrap();
        assert_eq!(all.len(), entries.len());
        for w in all.windows(2) {
            assert!(w[0].distance <= w[1].distance);
        }
    }
}
