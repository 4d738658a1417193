use crate::error::{Error, Result};
use crate::slic::map::flood;
use crate::slic::SuperpixelMap;

struct Component {
    label: u32,
    size: usize,
    first: usize,
}

/// Splits every label into its 4-connected components and folds components
/// smaller than `min_size` into a neighbour.
///
/// Components are visited in row-major order of their first pixel. The
/// first large component of a label keeps the label, later ones get fresh
/// labels. A small component joins whatever its first pixel's left
/// neighbour (or, in column 0, top neighbour) ends up as. The component
/// holding pixel (0, 0) has neither, so it joins the first adjacent
/// component that does not lead back to it, and keeps its own label when
/// every neighbour does. Labels are finally renumbered to `0..n` in
/// increasing order.
pub fn enforce_connectivity(
    width: usize,
    height: usize,
    labels: &[u32],
    min_size: usize,
) -> Result<SuperpixelMap> {
    if width == 0 || height == 0 || labels.len() != width * height {
        return Err(Error::Format(format!(
            "{width}x{height} labelling needs {} labels, got {}",
            width * height,
            labels.len()
        )));
    }
    let n = labels.len();
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Component> = Vec::new();
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for p in 0..n {
        if seen[p] {
            continue;
        }
        let id = comps.len();
        let label = labels[p];
        let mut size = 0;
        flood(
            width,
            height,
            p,
            &mut seen,
            &mut stack,
            |q| labels[q] == label,
            |q| {
                comp_of[q] = id;
                size += 1;
            },
        );
        comps.push(Component {
            label,
            size,
            first: p,
        });
    }

    // parent[c] = c for roots, otherwise the component c merges into
    let mut parent: Vec<usize> = (0..comps.len()).collect();
    let mut root_label = vec![0u32; comps.len()];
    let mut claimed = std::collections::HashSet::new();
    let mut fresh = labels.iter().copied().max().unwrap_or(0).saturating_add(1);
    for (c, comp) in comps.iter().enumerate() {
        if comp.size >= min_size || comps.len() == 1 {
            root_label[c] = if claimed.insert(comp.label) {
                comp.label
            } else {
                fresh += 1;
                fresh - 1
            };
        } else if comp.first % width > 0 {
            parent[c] = comp_of[comp.first - 1];
        } else if comp.first >= width {
            parent[c] = comp_of[comp.first - width];
        }
    }
    let find = |parent: &[usize], mut c: usize| {
        while parent[c] != c {
            c = parent[c];
        }
        c
    };
    let origin = comp_of[0];
    if comps.len() > 1 && comps[origin].size < min_size {
        let mut target = None;
        for p in 0..n {
            if comp_of[p] != origin {
                continue;
            }
            let (i, j) = (p % width, p / width);
            let mut neighbours = [usize::MAX; 4];
            if i > 0 {
                neighbours[0] = p - 1;
            }
            if i + 1 < width {
                neighbours[1] = p + 1;
            }
            if j > 0 {
                neighbours[2] = p - width;
            }
            if j + 1 < height {
                neighbours[3] = p + width;
            }
            target = neighbours
                .into_iter()
                .filter(|&q| q != usize::MAX && comp_of[q] != origin)
                .map(|q| comp_of[q])
                .find(|&c| find(&parent, c) != origin);
            if target.is_some() {
                break;
            }
        }
        match target {
            Some(t) => parent[origin] = t,
            None => {
                root_label[origin] = if claimed.insert(comps[origin].label) {
                    comps[origin].label
                } else {
                    fresh
                }
            }
        }
    }

    let raw: Vec<u32> = (0..n).map(|p| root_label[find(&parent, comp_of[p])]).collect();
    let mut used: Vec<u32> = raw.clone();
    used.sort_unstable();
    used.dedup();
    let compact: Vec<u32> = raw
        .iter()
        .map(|l| used.binary_search(l).expect("label present") as u32)
        .collect();
    SuperpixelMap::new(width, height, compact)
}
