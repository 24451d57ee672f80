// Measures one synthetic vessel cross-section and prints the clinical report.
#include <cstdio>

#include "ivuskit/geometry/measure.hpp"

using namespace ivuskit;

namespace {

BinaryMask disk(int size, double cy, double cx, double r, Target t) {
    BinaryMask m{Grid2D<std::uint8_t>(size, size, 0), t};
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx <= r * r) m.values.at(y, x) = 1;
        }
    return m;
}

}  // namespace

int main() {
    const int size = 256;
    const PixelSpacing ps{0.02};  // 0.02 mm per pixel
    const BinaryMask lumen = disk(size, 128, 140, 40, Target::Lumen);  // off-center lumen
    const BinaryMask ma = disk(size, 128, 128, 90, Target::Ma);

    const ClinicalReport report = measure_all(lumen, ma, ps);
    const auto& names = ClinicalReport::parameter_names();
    std::printf("%-20s %10s\n", "parameter", "value");
    for (int i = 0; i < ClinicalReport::kParameterCount; ++i)
        std::printf("%-20s %10.4f\n", names[static_cast<std::size_t>(i)], report.value(i));
    return 0;
}
