#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <filesystem>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"
#include "mar/mask/mask.hpp"

namespace mar::ct {

struct Ellipse {
    double center_x = 0.0;  // mm
    double center_y = 0.0;  // mm
    double semi_a = 1.0;    // mm, along the rotated x axis
    double semi_b = 1.0;    // mm
    double angle = 0.0;     // rad
    double mu = 0.0;        // mm^-1, additive

    bool contains(double x, double y) const {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dx = x - center_x, dy = y - center_y;
        const double u = (dx * c + dy * s) / semi_a;
        const double v = (-dx * s + dy * c) / semi_b;
        return u * u + v * v <= 1.0;
    }

    /// Half-extents of the axis-aligned bounding box.
    std::pair<double, double> half_extents() const {
        const double c = std::cos(angle), s = std::sin(angle);
        return {std::hypot(semi_a * c, semi_b * s), std::hypot(semi_a * s, semi_b * c)};
    }
};

struct MetalInsert {
    Ellipse shape;
    std::string material = "iron";
};

struct PhantomSpec {
    std::vector<Ellipse> ellipses;
    std::vector<MetalInsert> metals;

    /// Every ellipse's bounding box inside a width x height grid of pixel_size.
    void validate(std::size_t width, std::size_t height, double pixel_size) const {
        const double hx = 0.5 * static_cast<double>(width) * pixel_size;
        const double hy = 0.5 * static_cast<double>(height) * pixel_size;
        auto check = [&](const Ellipse& e, const std::string& what) {
            if (!(e.semi_a > 0.0) || !(e.semi_b > 0.0)) throw ConfigError(what + ": semi-axes must be positive");
            const auto [ex, ey] = e.half_extents();
            if (std::abs(e.center_x) + ex > hx + 1e-9 || std::abs(e.center_y) + ey > hy + 1e-9)
                throw ConfigError(what + " extends outside the field of view");
        };
        for (std::size_t i = 0; i < ellipses.size(); ++i) check(ellipses[i], "ellipse " + std::to_string(i));
        for (std::size_t i = 0; i < metals.size(); ++i) check(metals[i].shape, "metal insert " + std::to_string(i));
    }
};

/// Additive superposition of ellipse values sampled at pixel centres.
/// Metal inserts are not rendered; see render_metal_mask.
inline Image render_phantom(const PhantomSpec& spec, std::size_t width, std::size_t height, double pixel_size) {
    spec.validate(width, height, pixel_size);
    Image img(width, height, pixel_size);
    for (std::size_t r = 0; r < height; ++r) {
        const double y = img.y_of(r);
        for (std::size_t c = 0; c < width; ++c) {
            const double x = img.x_of(c);
            double v = 0.0;
            for (const auto& e : spec.ellipses)
                if (e.contains(x, y)) v += e.mu;
            img.at(r, c) = v;
        }
    }
    return img;
}

inline Mask render_metal_mask(const PhantomSpec& spec, std::size_t width, std::size_t height, double pixel_size) {
    spec.validate(width, height, pixel_size);
    Image grid(width, height, pixel_size);
    Mask m(width, height, MaskDomain::image);
    for (std::size_t r = 0; r < height; ++r)
        for (std::size_t c = 0; c < width; ++c)
            for (const auto& metal : spec.metals)
                if (metal.shape.contains(grid.x_of(c), grid.y_of(r))) m.at(r, c) = 1;
    return m;
}

namespace detail {

inline Ellipse ellipse_from(const boost::property_tree::ptree& sec) {
    Ellipse e;
    e.center_x = sec.get<double>("center_x", 0.0);
    e.center_y = sec.get<double>("center_y", 0.0);
    e.semi_a = sec.get<double>("semi_a");
    e.semi_b = sec.get<double>("semi_b", e.semi_a);
    e.angle = sec.get<double>("angle", 0.0);
    e.mu = sec.get<double>("mu", 0.0);
    return e;
}

}  // namespace detail

/**
 * Reads a phantom from named sections of key = value pairs:
 *
 *   [ellipse.body]            [metal.screw]
 *   semi_a = 50               center_x = 10
 *   semi_b = 40               semi_a = 3
 *   mu = 0.02                 material = iron
 *
 * Sections whose name starts with "ellipse" or "metal" are read in file order.
 */
inline PhantomSpec parse_phantom(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ptree_error& e) {
        throw ConfigError(std::string("phantom config: ") + e.what());
    }
    PhantomSpec spec;
    for (const auto& [name, sec] : tree) {
        try {
            if (name.rfind("ellipse", 0) == 0) {
                spec.ellipses.push_back(detail::ellipse_from(sec));
            } else if (name.rfind("metal", 0) == 0) {
                spec.metals.push_back({detail::ellipse_from(sec), sec.get<std::string>("material", "iron")});
            }
        } catch (const pt::ptree_error& e) {
            throw ConfigError("phantom config section [" + name + "]: " + e.what());
        }
    }
    return spec;
}

inline PhantomSpec parse_phantom(const std::string& text) {
    std::istringstream is(text);
    return parse_phantom(is);
}

}  // namespace mar::ct
