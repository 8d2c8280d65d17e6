#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cplab/config.hpp"
#include "cplab/datagen.hpp"
#include "cplab/diffusion.hpp"
#include "cplab/harness.hpp"
#include "cplab/image.hpp"
#include "cplab/verify.hpp"

namespace py = pybind11;
using namespace cplab;

namespace {

img::Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() == 2) {
        img::Image x(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), 1);
        std::copy(a.data(), a.data() + a.size(), x.values.begin());
        return x;
    }
    if (a.ndim() == 3 && (a.shape(2) == 1 || a.shape(2) == 3)) {
        img::Image x(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                     static_cast<int>(a.shape(2)));
        std::copy(a.data(), a.data() + a.size(), x.values.begin());
        return x;
    }
    throw std::invalid_argument("expected an HxW or HxWx{1,3} float array");
}

py::array_t<float> image_to_array(const img::Image& x) {
    if (x.channels == 1) {
        py::array_t<float> a({x.height, x.width});
        std::copy(x.values.begin(), x.values.end(), a.mutable_data());
        return a;
    }
    py::array_t<float> a({x.height, x.width, x.channels});
    std::copy(x.values.begin(), x.values.end(), a.mutable_data());
    return a;
}

cfg::RunConfig config_from_dict(const py::dict& overrides) {
    cfg::RunConfig c;
    for (auto item : overrides)
        c.set(py::str(item.first), py::str(item.second));
    return c;
}

img::TriggerPatch patch_from_args(const py::object& glyph, double area_fraction,
                                  const std::string& placement, double strength) {
    img::TriggerPatch p;
    p.glyph = glyph.is_none()
                  ? img::default_trigger_glyph()
                  : image_from_array(glyph.cast<
                        py::array_t<float, py::array::c_style | py::array::forcecast>>());
    p.area_fraction = area_fraction;
    p.placement = img::corner_from_string(placement);
    p.strength = strength;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "conditioning-channel poisoning lab: core operations";

    // ---- imaging ----
    m.def(
        "edge_map",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
           double blur_sigma, double threshold_fraction) {
            img::EdgeParams p;
            p.blur_sigma = blur_sigma;
            p.threshold_fraction = threshold_fraction;
            return image_to_array(img::edge_map(image_from_array(x), p));
        },
        py::arg("image"), py::arg("blur_sigma") = 1.0, py::arg("threshold_fraction") = 0.05,
        "Gaussian blur -> Sobel magnitude -> relative-threshold binarization");

    m.def(
        "composite_trigger",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
           const py::object& glyph, double area_fraction, const std::string& placement,
           double strength) {
            return image_to_array(img::composite_trigger(
                image_from_array(x),
                patch_from_args(glyph, area_fraction, placement, strength)));
        },
        py::arg("image"), py::arg("glyph") = py::none(), py::arg("area_fraction") = 0.10,
        py::arg("placement") = "bottom-right", py::arg("strength") = 1.0,
        "blend the trigger glyph into one corner of the image");

    m.def("mse", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                    const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return img::mse(image_from_array(a), image_from_array(b));
    });
    m.def("psnr", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return img::psnr(image_from_array(a), image_from_array(b));
    });
    m.def("ssim", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return img::ssim(image_from_array(a), image_from_array(b));
    });
    m.def("load_png",
          [](const std::string& path) { return image_to_array(img::load_png(path)); });
    m.def("save_png",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
             const std::string& path) { img::save_png(image_from_array(x), path); });
    m.def("default_trigger_glyph",
          [] { return image_to_array(img::default_trigger_glyph()); });
    m.def("default_attack_target",
          [] { return image_to_array(img::default_attack_target()); });

    // ---- diffusion ----
    m.def(
        "make_schedule",
        [](int T, double beta_start, double beta_end) {
            const auto s = diffusion::make_schedule(T, beta_start, beta_end);
            const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(s.beta.size())};
            return py::make_tuple(py::array_t<double>(shape, s.beta.data()),
                                  py::array_t<double>(shape, s.alpha_bar.data()));
        },
        py::arg("T") = 250, py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.025,
        "returns (beta, alpha_bar) tables");

    m.def(
        "q_sample",
        [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x0, int t,
           const py::array_t<float, py::array::c_style | py::array::forcecast>& eps, int T,
           double beta_start, double beta_end) {
            const auto s = diffusion::make_schedule(T, beta_start, beta_end);
            const auto xi = image_from_array(x0);
            const auto ei = image_from_array(eps);
            auto xt = Tensor<float>::from_data(
                {1, 1, xi.height, xi.width},
                std::vector<float>(xi.values.begin(), xi.values.end()));
            auto et = Tensor<float>::from_data(
                {1, 1, ei.height, ei.width},
                std::vector<float>(ei.values.begin(), ei.values.end()));
            auto z = diffusion::q_sample(xt, t, et, s);
            img::Image out(xi.height, xi.width, 1);
            std::copy(z.data().begin(), z.data().end(), out.values.begin());
            return image_to_array(out);
        },
        py::arg("x0"), py::arg("t"), py::arg("eps"), py::arg("T") = 250,
        py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.025,
        "z_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps");

    // ---- pipeline commands (config dict mirrors the CLI keys) ----
    m.def(
        "run",
        [](const std::string& command, const py::dict& overrides) {
            const auto config = config_from_dict(overrides);
            if (command == "gen-data") return harness::cmd_gen_data(config);
            if (command == "poison") return harness::cmd_poison(config);
            if (command == "train-backbone") return harness::cmd_train_backbone(config);
            if (command == "train-control") return harness::cmd_train_control(config, "");
            if (command == "sample") return harness::cmd_sample(config);
            if (command == "eval") return harness::cmd_eval(config);
            if (command == "sweep") return harness::cmd_sweep(config);
            fail("run: unknown command '", command,
                 "' (gen-data, poison, train-backbone, train-control, sample, eval, sweep)");
        },
        py::arg("command"), py::arg("overrides") = py::dict(),
        "execute a pipeline stage; overrides use the documented config keys");

    m.def(
        "config_keys",
        [] {
            py::list out;
            for (const auto& spec : cfg::key_registry())
                out.append(py::make_tuple(spec.key, spec.default_value, spec.doc));
            return out;
        },
        "documented config keys as (key, default, doc) tuples");

    m.def(
        "verify",
        [](int grad_seeds) {
            py::list out;
            for (const auto& c : verify::run_all(grad_seeds))
                out.append(py::make_tuple(c.name, c.pass, c.detail));
            return out;
        },
        py::arg("grad_seeds") = 3, "run the numerical verification suite");
}
