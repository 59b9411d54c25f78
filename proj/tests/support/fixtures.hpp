#pragma once

#include "procinv/schema.hpp"

namespace fixtures {

using namespace procinv;

// Triangle footprint, one facade with a single-cell pattern over all segments,
// one storey.
inline BuildingAbstraction minimal_building() {
    BuildingAbstraction b;
    b.height = 3.0;
    b.footprints = {Footprint{{{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}}};
    b.facades = {Facade{0, {CellsPattern{SegmentRange{0, 2}, {Cell{0, 0.0, {}}}}}}};
    b.storeys = {Storey{0.0, 0}};
    b.noise_level = 0.0;
    return b;
}

// Axis-aligned box building: w x d footprint, `storeys` storeys of equal height,
// two facades (ground, upper) with `bays` cells per segment.
inline BuildingAbstraction box_building(double w, double d, int storeys, int bays = 2, double storey_height = 3.0) {
    BuildingAbstraction b;
    b.height = storeys * storey_height;
    b.footprints = {Footprint{{{0.0, 0.0}, {w, 0.0}, {w, d}, {0.0, d}}}};
    auto facade = [&](std::uint32_t first_type) {
        CellsPattern p{SegmentRange{0, 3}, {}};
        for (int i = 0; i < bays; ++i) {
            p.cells.push_back(Cell{first_type + static_cast<std::uint32_t>(i % 2), static_cast<double>(i) / bays, {}});
        }
        return Facade{0, {p}};
    };
    b.facades = {facade(0), facade(2)};
    for (int s = 0; s < storeys; ++s) {
        b.storeys.push_back(Storey{s * storey_height, s == 0 ? 0u : 1u});
    }
    return b;
}

inline const std::vector<std::uint32_t> &default_material_counts() {
    static const std::vector<std::uint32_t> counts(64, 3);
    return counts;
}

} // namespace fixtures
