// End-to-end miniature: phantom dataset -> short training run -> prediction
// -> segmentation score on one held-back slice.
#include <cstdio>
#include <filesystem>

#include "ivuskit/data/phantom.hpp"
#include "ivuskit/metrics/metrics.hpp"
#include "ivuskit/train/predict.hpp"
#include "ivuskit/train/trainer.hpp"

using namespace ivuskit;

int main() {
    const auto dir = std::filesystem::temp_directory_path() / "ivuskit_demo";
    std::filesystem::remove_all(dir);

    PhantomSpec spec;
    spec.count = 12;
    spec.image_size = 64;
    spec.seed = 21;
    spec.lumen_radius_range = {4.0, 8.0};
    spec.ma_radius_range = {15.0, 23.0};
    spec.slices_per_patient = 3;
    const DatasetManifest manifest = phantom_generate(spec, dir);
    std::printf("generated %zu slices under %s\n", manifest.entries.size(), dir.c_str());

    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 2;
    tc.lr = 3e-3;
    tc.folds = 2;
    tc.test_fraction = 1.0 / 12.0;  // one held-back slice
    tc.seed = 2;
    const FoldPlan plan = split_folds(manifest, tc);

    ModelConfig mc;
    mc.depth = 2;
    mc.head_count = 2;
    mc.base_channels = 8;
    mc.input_h = mc.input_w = 64;
    mc.init_seed = 4;
    NestedUNet model(mc);

    const std::string ckpt = (dir / "model.ckpt").string();
    train_model(model, manifest, plan, 0, tc, ckpt, [](const TrainHistory::Record& r) {
        std::printf("epoch %d: train %.4f  val %.4f\n", r.epoch, r.train_loss, r.val_loss);
    });

    NestedUNet best = load_checkpoint(ckpt);
    const LoadedDataset held = load_dataset(manifest, plan.test_set, mc.targets);
    const auto preds = predict(best, held, 1);
    for (std::size_t t = 0; t < preds[0].channels.size(); ++t) {
        const BinaryMask seg = postprocess(preds[0].channels[t].map, preds[0].channels[t].target);
        BinaryMask truth{Grid2D<std::uint8_t>(64, 64, 0), preds[0].channels[t].target};
        const float* plane = held.truth.plane(0, static_cast<int>(t));
        for (std::size_t i = 0; i < truth.values.v.size(); ++i)
            truth.values.v[i] = plane[i] != 0.0f ? 1 : 0;
        std::printf("held-back slice %s: %s JM = %.4f\n", preds[0].slice_id.c_str(),
                    target_name(seg.target), jaccard(seg, truth));
    }

    std::filesystem::remove_all(dir);
    return 0;
}
