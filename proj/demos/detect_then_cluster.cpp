// Generates one dataset, reads the cluster count and centroids off its
// rasterized image, and compares k-means seeded from them with k-means
// seeded from random points.

#include <cstdio>
#include <cstdlib>

#include "clusinit/clustering.hpp"
#include "clusinit/datagen.hpp"
#include "clusinit/detector.hpp"
#include "clusinit/eval.hpp"
#include "clusinit/raster.hpp"

using namespace clusinit;

int main(int argc, char** argv) {
    GeneratorConfig cfg;
    cfg.shape_family = ShapeFamily::VariedVarianceBlobs;
    cfg.k = argc > 1 ? std::atoi(argv[1]) : 7;
    cfg.n_total = 30000;
    cfg.separation_min = 5.0;
    cfg.seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 42;
    const Dataset2D ds = generate(cfg);

    const RasterFrame frame = rasterize(ds);
    const auto boxes = density_blob_detect(frame);
    const InitParams params = boxes_to_init(boxes, frame);
    std::printf("generated k=%d, detected k=%d\n", ds.k_true, params.k);
    for (int c = 0; c < params.k; ++c)
        std::printf("  centroid (%8.3f, %8.3f)  ~%6.0f points  confidence %.2f\n", params.centroids[static_cast<std::size_t>(c)].x,
                    params.centroids[static_cast<std::size_t>(c)].y, params.size_estimates[static_cast<std::size_t>(c)],
                    params.confidences[static_cast<std::size_t>(c)]);
    const auto match = match_centroids(ds.centroids_true, params.centroids);
    std::printf("mean distance to generated centroids: %.3f (bounding-box diagonal %.1f)\n", match.mean_distance,
                bounds_of(ds.points).diagonal());

    const auto detected = kmeans(ds.points, DetectedInit{params});
    const auto random = kmeans(ds.points, RandomInit{ds.k_true, cfg.seed});
    std::printf("k-means, detected init: AR %.4f after %d iterations\n", accuracy_rate(ds.labels, detected.assignments), detected.iterations);
    std::printf("k-means, random init:   AR %.4f after %d iterations\n", accuracy_rate(ds.labels, random.assignments), random.iterations);
    return 0;
}
