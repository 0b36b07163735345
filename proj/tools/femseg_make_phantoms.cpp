// Writes synthetic ellipsoid phantom volumes and masks plus a ready-to-use
// dataset manifest, so the pipeline can be exercised without cohort data.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "femseg/io/nifti.hpp"
#include "femseg/phantom.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic ellipsoid phantoms"};
  std::string out_dir = "phantoms";
  int count = 8;
  int validation = 2;
  std::uint64_t seed = 7;
  std::vector<std::int64_t> dims{64, 64, 64};
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--count", count, "Total phantoms to generate")->check(CLI::PositiveNumber);
  app.add_option("--validation", validation, "Phantoms reserved for the validation split");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--dims", dims, "Grid extents z y x")->expected(3);

  CLI11_PARSE(app, argc, argv);
  if (validation < 0 || validation >= count) {
    std::cerr << "error: validation count must lie in [0, count)" << std::endl;
    return 2;
  }

  try {
    std::filesystem::create_directories(out_dir);
    nlohmann::json train = nlohmann::json::array();
    nlohmann::json val = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
      auto rng = femseg::make_rng(femseg::derive_seed(seed, static_cast<std::uint64_t>(i)));
      auto [img, mask] =
          femseg::make_ellipsoid_phantom(femseg::Dim3{dims[0], dims[1], dims[2]}, rng);
      char name[32];
      std::snprintf(name, sizeof name, "phantom_%02d", i);
      const auto img_path = std::filesystem::path(out_dir) / (std::string(name) + ".nii");
      const auto mask_path = std::filesystem::path(out_dir) / (std::string(name) + "_mask.nii");
      femseg::nifti::write_volume_file(img_path, img);
      femseg::nifti::write_volume_file(mask_path, mask);
      nlohmann::json entry{{"image", img_path.string()}, {"mask", mask_path.string()}};
      (i < count - validation ? train : val).push_back(entry);
      std::cout << "wrote " << img_path.string() << std::endl;
    }
    nlohmann::json manifest{{"train", train}, {"validation", val}};
    std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json", std::ios::trunc);
    mf << manifest.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  }
  return 0;
}
