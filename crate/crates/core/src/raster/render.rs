use rayon::prelude::*;

use super::project::{project_backward, project_taped, ProjectTape};
use super::tile::{rasterize, rasterize_backward, RasterTape};
use super::{Gaussian2D, RasterError, RenderOutput};
use crate::image::Image;
use crate::predictor::{
    expand_tree_cached, expand_tree_taped, tree_backward, AttrGrad, ExpandedTree, ModelGrads, ParentGrad,
    PredictorError, TreeCache, TreeTape,
};
use crate::real::Real;
use crate::scene::{Camera, SceneModel};

/// Trees per work unit in the backward pass. Fixed so the reduction order
/// does not depend on the thread count.
const BACKWARD_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct RenderTape<R> {
    pub camera: Camera,
    pub trees: Vec<(ExpandedTree<R>, TreeTape<R>)>,
    /// Flattened node index (`parent * (K+1) + node`) of each projected splat.
    pub sources: Vec<usize>,
    pub projections: Vec<ProjectTape<R>>,
    pub splats: Vec<Gaussian2D<R>>,
    pub raster: RasterTape<R>,
}

#[derive(Debug, Clone)]
pub struct RenderGrads<R> {
    pub model: ModelGrads<R>,
    pub parents: Vec<ParentGrad<R>>,
    /// Per flattened node: gradient on the projected mean, in pixels.
    pub screen: Vec<[R; 2]>,
}

fn check_camera(camera: &Camera) -> Result<(), RasterError> {
    camera.validate()?;
    if camera.width == 0 || camera.height == 0 {
        return Err(RasterError::EmptyImage(camera.width, camera.height));
    }
    Ok(())
}

/// Rasterize already-projected splats. Per-splat stats follow input order.
pub fn render_splats<R: Real>(
    splats: &[Gaussian2D<R>],
    background: [R; 3],
    width: usize,
    height: usize,
) -> RenderOutput<R> {
    rasterize(splats, background, width, height).0
}

fn project_all<R: Real>(
    trees: &[ExpandedTree<R>],
    camera: &Camera,
) -> (Vec<usize>, Vec<Gaussian2D<R>>, Vec<ProjectTape<R>>) {
    let per_tree: Vec<Vec<(usize, Gaussian2D<R>, ProjectTape<R>)>> = trees
        .par_iter()
        .enumerate()
        .map(|(p, tree)| {
            let n = tree.nodes.len();
            tree.nodes
                .iter()
                .enumerate()
                .filter_map(|(k, attrs)| project_taped(attrs, camera).map(|(g, t)| (p * n + k, g, t)))
                .collect()
        })
        .collect();
    let total: usize = per_tree.iter().map(Vec::len).sum();
    let mut sources = Vec::with_capacity(total);
    let mut splats = Vec::with_capacity(total);
    let mut tapes = Vec::with_capacity(total);
    for list in per_tree {
        for (s, g, t) in list {
            sources.push(s);
            splats.push(g);
            tapes.push(t);
        }
    }
    (sources, splats, tapes)
}

/// Re-index per-splat stats from projected order to flattened node order.
fn scatter_stats<R: Real>(out: &mut RenderOutput<R>, sources: &[usize], total: usize) {
    let mut visible = vec![false; total];
    let mut contribution = vec![R::zero(); total];
    for (j, &s) in sources.iter().enumerate() {
        visible[s] = out.visible[j];
        contribution[s] = out.contribution[j];
    }
    out.visible = visible;
    out.contribution = contribution;
}

fn render_trees<R: Real>(
    trees: &[ExpandedTree<R>],
    camera: &Camera,
    background: [R; 3],
    total: usize,
) -> RenderOutput<R> {
    let (sources, splats, _) = project_all(trees, camera);
    let (mut out, _) = rasterize(&splats, background, camera.width, camera.height);
    scatter_stats(&mut out, &sources, total);
    out
}

/// Expand every tree and render. Per-splat stats are indexed by flattened
/// node.
pub fn render<R: Real>(model: &SceneModel<R>, camera: &Camera, background: [R; 3]) -> Result<RenderOutput<R>, RasterError> {
    check_camera(camera)?;
    let trees = model
        .parents
        .par_iter()
        .map(|p| crate::predictor::expand_tree(p, camera, model))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(render_trees(&trees, camera, background, model.splat_count()))
}

/// Inference path: geometry from `cache`, only colours are recomputed.
pub fn render_cached<R: Real>(
    model: &SceneModel<R>,
    cache: &TreeCache<R>,
    camera: &Camera,
    background: [R; 3],
) -> Result<RenderOutput<R>, RasterError> {
    check_camera(camera)?;
    let trees = (0..model.parents.len())
        .into_par_iter()
        .map(|i| expand_tree_cached(i, camera, model, cache))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(render_trees(&trees, camera, background, model.splat_count()))
}

pub fn render_taped<R: Real>(
    model: &SceneModel<R>,
    camera: &Camera,
    background: [R; 3],
) -> Result<(RenderOutput<R>, RenderTape<R>), RasterError> {
    check_camera(camera)?;
    let trees = model
        .parents
        .par_iter()
        .map(|p| expand_tree_taped(p, camera, model))
        .collect::<Result<Vec<_>, PredictorError>>()?;
    let expanded: Vec<ExpandedTree<R>> = trees.iter().map(|(e, _)| e.clone()).collect();
    let (sources, splats, projections) = project_all(&expanded, camera);
    let (mut out, raster) = rasterize(&splats, background, camera.width, camera.height);
    scatter_stats(&mut out, &sources, model.splat_count());
    Ok((
        out,
        RenderTape {
            camera: camera.clone(),
            trees,
            sources,
            projections,
            splats,
            raster,
        },
    ))
}

/// Gradients of `sum(d_image * render)` with respect to the model.
pub fn render_backward<R: Real>(
    model: &SceneModel<R>,
    tape: &RenderTape<R>,
    d_image: &Image<R>,
) -> Result<RenderGrads<R>, RasterError> {
    let (w, h) = (tape.raster.width, tape.raster.height);
    if d_image.width != w || d_image.height != h {
        return Err(RasterError::GradientShape {
            expected: (w, h),
            got: (d_image.width, d_image.height),
        });
    }
    let n_nodes = model.config.nodes_per_tree();
    let total = model.parents.len() * n_nodes;
    let splat_grads = rasterize_backward(&tape.splats, &tape.raster, d_image);

    let mut node_grads = vec![AttrGrad::default(); total];
    let mut screen = vec![[R::zero(); 2]; total];
    let projected: Vec<AttrGrad<R>> = splat_grads
        .par_iter()
        .enumerate()
        .map(|(j, g)| {
            let s = tape.sources[j];
            let attrs = &tape.trees[s / n_nodes].0.nodes[s % n_nodes];
            project_backward(attrs, &tape.camera, &tape.projections[j], g)
        })
        .collect();
    for (j, g) in projected.into_iter().enumerate() {
        let s = tape.sources[j];
        node_grads[s] = g;
        screen[s] = splat_grads[j].mean;
    }

    let chunks: Vec<(ModelGrads<R>, Vec<ParentGrad<R>>)> = tape
        .trees
        .par_chunks(BACKWARD_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = ModelGrads::new(&model.nets);
            let mut parents = Vec::with_capacity(chunk.len());
            for (i, (_, tree_tape)) in chunk.iter().enumerate() {
                let p = c * BACKWARD_CHUNK + i;
                let grads = &node_grads[p * n_nodes..(p + 1) * n_nodes];
                if grads.iter().all(|g| *g == AttrGrad::default()) {
                    parents.push(ParentGrad {
                        position: [R::zero(); 3],
                        log_scale: [R::zero(); 3],
                    });
                    continue;
                }
                parents.push(tree_backward(model, &model.parents[p], tree_tape, grads, &mut acc)?);
            }
            Ok((acc, parents))
        })
        .collect::<Result<Vec<_>, PredictorError>>()?;

    let mut model_grads = ModelGrads::new(&model.nets);
    let mut parents = Vec::with_capacity(model.parents.len());
    for (g, p) in chunks {
        model_grads.merge(&g);
        parents.extend(p);
    }
    Ok(RenderGrads {
        model: model_grads,
        parents,
        screen,
    })
}
