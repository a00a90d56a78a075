#include "mvf/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace mvf {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t epoch_seed(uint64_t seed, int epoch) {
  return splitmix64(seed ^ splitmix64(static_cast<uint64_t>(epoch)));
}

void SynthSpec::validate() const {
  if (n_cases < 4) throw ConfigError("synthetic.n_cases must be >= 4");
  if (image_size < 16) throw ConfigError("synthetic.image_size must be >= 16");
  if (!(positive_rate > 0.0 && positive_rate < 1.0))
    throw ConfigError("synthetic.positive_rate must lie in (0, 1)");
  if (!(noise_level >= 0.0))
    throw ConfigError("synthetic.noise_level must be >= 0");
}

std::vector<IpsilateralCase> load_manifest(const std::string& path,
                                           int target_size, View examined_view) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open manifest");
  const fs::path base = fs::path(path).parent_path();

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty manifest");
  const auto header = split_csv_line(trim(line));
  const std::vector<std::string> expected = {"patient_id", "side",  "view",
                                             "image_path", "label", "split"};
  const bool has_split = header.size() == 6;
  if (header.size() != 5 && header.size() != 6)
    throw DataError(path + ": manifest header must have 5 or 6 columns");
  for (size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) != expected[i])
      throw DataError(path + ": unexpected manifest column '" + header[i] +
                      "' (expected '" + expected[i] + "')");

  struct Row {
    std::string image_path;
    int label;
    bool present = false;
  };
  struct Group {
    Row cc, mlo;
    Split split;
  };
  std::map<std::tuple<std::string, char, int>, Group> groups;
  std::vector<std::tuple<std::string, char, int>> order;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": wrong column count");
    const std::string pid = trim(f[0]);
    const std::string side_s = trim(f[1]);
    const std::string view_s = trim(f[2]);
    const std::string img = trim(f[3]);
    const std::string label_s = trim(f[4]);
    if (side_s != "L" && side_s != "R")
      throw DataError(path + ":" + std::to_string(line_no) + ": side must be L or R");
    if (view_s != "CC" && view_s != "MLO")
      throw DataError(path + ":" + std::to_string(line_no) + ": view must be CC or MLO");
    if (label_s != "0" && label_s != "1")
      throw DataError(path + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    Split sp = Split::Unassigned;
    if (has_split) {
      const std::string sp_s = trim(f[5]);
      if (sp_s == "train") sp = Split::Train;
      else if (sp_s == "test") sp = Split::Test;
      else
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": split must be train or test");
    }
    const auto key = std::make_tuple(pid, side_s[0], static_cast<int>(sp));
    auto it = groups.find(key);
    if (it == groups.end()) {
      order.push_back(key);
      it = groups.emplace(key, Group{{}, {}, sp}).first;
    }
    Row& slot = view_s == "CC" ? it->second.cc : it->second.mlo;
    if (slot.present)
      throw DataError(path + ": duplicate " + view_s + " row for patient " + pid +
                      " side " + side_s);
    slot = {img, label_s[0] - '0', true};
  }

  std::vector<IpsilateralCase> cases;
  cases.reserve(order.size());
  for (const auto& key : order) {
    const auto& [pid, side, sp_int] = key;
    const Group& g = groups.at(key);
    if (!g.cc.present || !g.mlo.present)
      throw DataError(path + ": patient " + pid + " side " + std::string(1, side) +
                      " is missing its " + (g.cc.present ? "MLO" : "CC") + " view");
    if (g.cc.label != g.mlo.label)
      throw DataError(path + ": patient " + pid + " side " + std::string(1, side) +
                      " has mismatched labels across views");
    IpsilateralCase c;
    c.patient_id = pid;
    c.side = side;
    c.label = g.cc.label;
    c.split = g.split;
    const auto resolve = [&](const std::string& p) {
      const fs::path fp(p);
      return fp.is_absolute() ? fp.string() : (base / fp).string();
    };
    ImageU8 cc = resize_bilinear(read_pgm(resolve(g.cc.image_path)), target_size);
    ImageU8 mlo = resize_bilinear(read_pgm(resolve(g.mlo.image_path)), target_size);
    if (examined_view == View::CC) {
      c.examined = std::move(cc);
      c.auxiliary = std::move(mlo);
    } else {
      c.examined = std::move(mlo);
      c.auxiliary = std::move(cc);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

std::pair<std::vector<IpsilateralCase>, std::vector<IpsilateralCase>>
stratified_split(const std::vector<IpsilateralCase>& cases,
                 double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw UsageError("train_fraction must lie strictly in (0, 1)");
  std::vector<int> by_class[2];
  for (size_t i = 0; i < cases.size(); ++i)
    by_class[cases[i].label].push_back(static_cast<int>(i));
  if (by_class[0].size() < 2 || by_class[1].size() < 2)
    throw UsageError("stratified split needs at least 2 cases of each class");

  std::vector<IpsilateralCase> train, test;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 2; ++c) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const long n_train =
        std::lround(train_fraction * static_cast<double>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) {
      IpsilateralCase copy = cases[idx[i]];
      copy.split = static_cast<long>(i) < n_train ? Split::Train : Split::Test;
      (copy.split == Split::Train ? train : test).push_back(std::move(copy));
    }
  }
  if (train.empty() || test.empty())
    throw UsageError("stratified split produced an empty partition");
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<int>> make_batches(int n_cases, int batch_cases,
                                           uint64_t seed, bool shuffle) {
  if (batch_cases < 1) throw UsageError("batch_cases must be >= 1");
  std::vector<int> idx(n_cases);
  std::iota(idx.begin(), idx.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n_cases; start += batch_cases) {
    const int end = std::min(n_cases, start + batch_cases);
    batches.emplace_back(idx.begin() + start, idx.begin() + end);
  }
  return batches;
}

namespace {

// Structured glyphs, one vocabulary per view.
ImageU8 glyph(int view, int bit, int size) {
  ImageU8 img(size, size);
  const uint8_t hi = 220, lo = 35;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      bool bright;
      if (view == 0) {
        bright = bit == 0 ? (y / 4) % 2 == 0 : (x / 4) % 2 == 0;
      } else {
        bright = bit == 0 ? ((y / 8) + (x / 8)) % 2 == 0 : ((x + y) / 4) % 2 == 0;
      }
      img.at(y, x) = bright ? hi : lo;
    }
  }
  return img;
}

std::vector<int> scramble_permutation(int n_pixels, uint64_t seed) {
  std::vector<int> perm(n_pixels);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

ImageU8 apply_scramble(const ImageU8& src, const std::vector<int>& perm) {
  ImageU8 out(src.width, src.height);
  for (size_t i = 0; i < perm.size(); ++i) out.pixels[perm[i]] = src.pixels[i];
  return out;
}

}  // namespace

std::vector<IpsilateralCase> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const int npx = spec.image_size * spec.image_size;
  const std::vector<int> perm_cc =
      scramble_permutation(npx, splitmix64(spec.view_scramble_seed * 2 + 0));
  const std::vector<int> perm_mlo =
      scramble_permutation(npx, splitmix64(spec.view_scramble_seed * 2 + 1));

  // Scrambled glyph templates, one per (view, bit).
  ImageU8 tmpl[2][2];
  for (int b = 0; b < 2; ++b) {
    tmpl[0][b] = apply_scramble(glyph(0, b, spec.image_size), perm_cc);
    tmpl[1][b] = apply_scramble(glyph(1, b, spec.image_size), perm_mlo);
  }

  std::mt19937_64 rng(splitmix64(spec.view_scramble_seed ^ 0xD1CEFACEULL));
  std::bernoulli_distribution label_dist(spec.positive_rate);
  std::bernoulli_distribution bit_dist(0.5);
  std::normal_distribution<double> noise(0.0, spec.noise_level * 255.0);

  const auto render = [&](const ImageU8& t) {
    ImageU8 img = t;
    if (spec.noise_level > 0.0) {
      for (auto& px : img.pixels) {
        const double v = px + noise(rng);
        px = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
    return img;
  };

  std::vector<IpsilateralCase> cases;
  cases.reserve(spec.n_cases);
  for (int i = 0; i < spec.n_cases; ++i) {
    const int label = label_dist(rng) ? 1 : 0;
    const int bit_cc = bit_dist(rng) ? 1 : 0;
    const int bit_mlo = label ^ bit_cc;
    IpsilateralCase c;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "case%04d", i);
    c.patient_id = buf;
    c.side = 'L';
    c.label = label;
    c.examined = render(tmpl[0][bit_cc]);
    c.auxiliary = render(tmpl[1][bit_mlo]);
    cases.push_back(std::move(c));
  }
  return cases;
}

void swap_roles(std::vector<IpsilateralCase>& cases) {
  for (auto& c : cases) std::swap(c.examined, c.auxiliary);
}

void write_dataset(const std::vector<IpsilateralCase>& cases,
                   const std::string& out_dir) {
  const fs::path root(out_dir);
  fs::create_directories(root / "images");
  std::ofstream manifest(root / "manifest.csv", std::ios::trunc);
  if (!manifest) throw DataError(out_dir + ": cannot write manifest");
  const bool with_split =
      std::any_of(cases.begin(), cases.end(),
                  [](const IpsilateralCase& c) { return c.split != Split::Unassigned; });
  manifest << "patient_id,side,view,image_path,label";
  if (with_split) manifest << ",split";
  manifest << "\n";
  for (const auto& c : cases) {
    const std::string cc_rel = "images/" + c.patient_id + "_" + c.side + "_cc.pgm";
    const std::string mlo_rel = "images/" + c.patient_id + "_" + c.side + "_mlo.pgm";
    write_pgm((root / cc_rel).string(), c.examined);
    write_pgm((root / mlo_rel).string(), c.auxiliary);
    const std::string split_s = c.split == Split::Train ? "train" : "test";
    for (const auto& [view, rel] :
         {std::pair{std::string("CC"), cc_rel}, std::pair{std::string("MLO"), mlo_rel}}) {
      manifest << c.patient_id << "," << c.side << "," << view << "," << rel << ","
               << c.label;
      if (with_split) manifest << "," << split_s;
      manifest << "\n";
    }
  }
}

PreparedDataset prepare_dataset(const std::vector<IpsilateralCase>& train,
                                const std::vector<IpsilateralCase>& test,
                                int image_size, bool zero_auxiliary) {
  PreparedDataset ds;
  ds.image_size = image_size;

  const auto to_floats = [&](const ImageU8& img) {
    return to_unit_float(resize_bilinear(img, image_size));
  };

  double sum = 0.0, sum_sq = 0.0;
  size_t count = 0;
  for (const auto& c : train) {
    for (const ImageU8* img : {&c.examined, &c.auxiliary}) {
      for (const float v : to_floats(*img)) {
        sum += v;
        sum_sq += static_cast<double>(v) * v;
        ++count;
      }
    }
  }
  if (count == 0) throw UsageError("prepare_dataset: empty training split");
  ds.pixel_mean = sum / count;
  ds.pixel_std = std::sqrt(std::max(sum_sq / count - ds.pixel_mean * ds.pixel_mean, 0.0));
  if (ds.pixel_std < 1e-6) ds.pixel_std = 1.0;

  const auto standardize = [&](const ImageU8& img, bool zero) {
    Tensor<float> t(1, 1, image_size, image_size);
    if (!zero) {
      const auto px = to_floats(img);
      for (size_t i = 0; i < px.size(); ++i)
        t.data[i] = static_cast<float>((px[i] - ds.pixel_mean) / ds.pixel_std);
    }
    return t;
  };

  const auto convert = [&](const std::vector<IpsilateralCase>& src,
                           std::vector<PreparedCase>& dst) {
    dst.reserve(src.size());
    for (const auto& c : src)
      dst.push_back({standardize(c.examined, false),
                     standardize(c.auxiliary, zero_auxiliary), c.label});
  };
  convert(train, ds.train);
  convert(test, ds.test);
  return ds;
}

BatchTensors assemble_batch(const std::vector<PreparedCase>& cases,
                            const std::vector<int>& indices) {
  if (indices.empty()) throw UsageError("assemble_batch: empty batch");
  const int s = cases[indices[0]].examined.h;
  BatchTensors b{Tensor<float>(static_cast<int>(indices.size()), 1, s, s),
                 Tensor<float>(static_cast<int>(indices.size()), 1, s, s),
                 {}};
  const size_t per = static_cast<size_t>(s) * s;
  for (size_t i = 0; i < indices.size(); ++i) {
    const PreparedCase& c = cases[indices[i]];
    std::memcpy(b.examined.data.data() + per * i, c.examined.data.data(),
                per * sizeof(float));
    std::memcpy(b.auxiliary.data.data() + per * i, c.auxiliary.data.data(),
                per * sizeof(float));
    b.labels.push_back(c.label);
  }
  return b;
}

}  // namespace mvf
