#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <span>
#include <string_view>
#include <vector>

#include "native/comat.hpp"
#include "native/redaf.hpp"

namespace native::cli {

// Everything a training run depends on. Flat text form:
//
//   [run]    data_dir, seed, modalities, save_every, threads
//   [redaf]  dim, no_relation_guidance
//   [train]  gamma, beta, negatives, lr_d, lr_g, batch_size, epochs, n_critic
//   [comat]  lambda1, lambda2, noise_dim, no_comat, no_gp, vanilla_gan,
//            mlp_discriminator, gp_sign
//
// out_dir is not part of the text form: a snapshot lives inside it.
struct RunConfig {
  HyperParams hp;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  // Modality filter; empty keeps every modality in the dataset.
  std::vector<std::string> modalities;
  bool no_comat = false;
  bool no_relation_guidance = false;
  bool no_gp = false;
  bool vanilla_gan = false;
  bool mlp_discriminator = false;
  GpSign gp_sign = GpSign::paper;
  std::size_t save_every = 0;
  std::size_t threads = 1;

  // "full" (the defaults) or "desk". ConfigError otherwise.
  static RunConfig preset(std::string_view name);

  // `section.key` = text value, as in a config file. ConfigError on an
  // unknown key or a value of the wrong type.
  void set(std::string_view dotted_key, std::string_view value);
  // Reads `[section]` / `key = value` lines; `#` starts a comment.
  // Unknown sections and keys, duplicates and bad values are ConfigErrors
  // naming the line.
  void apply_text(std::string_view text, std::string_view origin = "config");
  void apply_file(const std::filesystem::path& path);

  // Throws ConfigError when the run cannot start.
  void validate() const;

  ComatOptions comat_options() const;

  std::string to_text() const;
  nlohmann::ordered_json to_json() const;
};

// Resolves a modality filter against the dataset's names. Each entry is an
// exact name or an unambiguous case-insensitive prefix ("T" for "text");
// "S" names the structural modality, which is always kept.
std::vector<std::string> resolve_modalities(std::span<const std::string> wanted,
                                            std::span<const ModalityInfo> available);

}  // namespace native::cli
