//------------------------------------------------------------------------------
//
//   Copyright 2026 The ensvis Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

#include "ensvis/pipeline.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/codebook.hpp"
#include "ensvis/error.hpp"
#include "ensvis/featstore.hpp"
#include "ensvis/fisher.hpp"
#include "ensvis/parallel.hpp"
#include "ensvis/sift.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <tuple>

namespace ensvis::pipeline {

namespace {

template <typename Fn>
auto stage(char const *name, Fn &&fn)
{
  try
  {
    return fn();
  }
  catch (Error const &e)
  {
    throw e.within(name);
  }
  catch (std::exception const &e)
  {
    throw Error(ErrorCode::Internal, std::string(name) + ": " + e.what());
  }
}

std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in)
  {
    fail(ErrorCode::Io, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(std::filesystem::path const &path, std::string const &text)
{
  write_file(path, std::span<std::uint8_t const>(reinterpret_cast<std::uint8_t const *>(text.data()),
                                                 text.size()));
}

std::vector<std::uint64_t> ids_of(std::vector<Image> const &images)
{
  std::vector<std::uint64_t> ids;
  ids.reserve(images.size());
  for (auto const &img : images)
  {
    ids.push_back(img.id);
  }
  return ids;
}

std::vector<std::uint32_t> labels_of(std::vector<Image> const &images)
{
  std::vector<std::uint32_t> labels;
  labels.reserve(images.size());
  for (auto const &img : images)
  {
    labels.push_back(img.label);
  }
  return labels;
}

std::vector<std::uint32_t> label_table(std::span<std::uint32_t const> labels)
{
  std::set<std::uint32_t> const distinct(labels.begin(), labels.end());
  return {distinct.begin(), distinct.end()};
}

Matrix to_matrix(featstore::FeatureFile const &ff)
{
  Matrix m(ff.count(), ff.dim);
  std::copy(ff.rows.begin(), ff.rows.end(), m.data().begin());
  return m;
}

bool uses_sift(ensemble::EnsembleConfig const &config)
{
  return std::any_of(config.streams.begin(), config.streams.end(),
                     [](auto const &s) { return s.kind == ensemble::StreamKind::SiftFv; });
}

ensemble::FeatureStream const *find_stream(ensemble::EnsembleConfig const &config, std::string const &only)
{
  if (only.empty())
  {
    return nullptr;
  }
  for (auto const &s : config.streams)
  {
    if (s.name == only)
    {
      return &s;
    }
  }
  fail(ErrorCode::InvalidArgument, "no stream named '" + only + "' in the ensemble config");
}

std::filesystem::path pca_file(RunConfig const &cfg, std::string const &name)
{
  return model_dir(cfg) / (name + ".pca");
}

std::string model_display(std::string const &model)
{
  if (model == "vgg16" || model == "vgg" || model == "vggnet" || model == "vgg19")
  {
    return "VGGNet";
  }
  if (model == "alexnet")
  {
    return "AlexNet";
  }
  return model;
}

constexpr char const *kDeepEnsemble     = "Deep Ensemble";
constexpr char const *kSiftDeepEnsemble = "SIFT + Deep Ensemble";
constexpr char const *kEnsemble         = "Ensemble";
constexpr char const *kSiftRow          = "SIFT (FV)";

std::vector<std::string> split_csv(std::string const &line)
{
  std::vector<std::string> out;
  std::string              cur;
  for (char c : line)
  {
    if (c == ',')
    {
      out.push_back(cur);
      cur.clear();
    }
    else if (c != '\r')
    {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double csv_double(std::string const &s)
{
  try
  {
    std::size_t used = 0;
    double      v    = std::stod(s, &used);
    if (used == s.size())
    {
      return v;
    }
  }
  catch (std::exception const &)
  {}
  fail(ErrorCode::Format, "bad number '" + s + "' in report CSV");
}

std::uint64_t csv_uint(std::string const &s)
{
  try
  {
    std::size_t used = 0;
    auto        v    = std::stoull(s, &used);
    if (used == s.size() && !s.empty() && s.front() != '-')
    {
      return v;
    }
  }
  catch (std::exception const &)
  {}
  fail(ErrorCode::Format, "bad count '" + s + "' in report CSV");
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::filesystem::path sift_path(RunConfig const &cfg, Split split)
{
  return cfg.work_dir / featstore::feature_file_name({"sift", 0}, split);
}

std::filesystem::path fv_path(RunConfig const &cfg, Split split)
{
  return cfg.work_dir / featstore::feature_file_name(ensemble::kSiftFvKey, split);
}

std::filesystem::path gmm_path(RunConfig const &cfg)
{
  return cfg.work_dir / "gmm.bin";
}

std::filesystem::path model_dir(RunConfig const &cfg)
{
  return cfg.work_dir / "ensemble";
}

ensemble::EnsembleConfig load_run_ensemble(RunConfig const &cfg)
{
  return cfg.ensemble_config ? ensemble::load_config(*cfg.ensemble_config) : ensemble::default_config();
}

std::vector<Image> load_split(RunConfig const &cfg, Split split)
{
  auto images = load_cifar10(cfg.data_dir, split);
  if (cfg.subset == 0)
  {
    return images;
  }
  std::map<std::uint32_t, std::size_t> per_class;
  for (auto const &img : images)
  {
    ++per_class[img.label];
  }
  for (auto const &[label, count] : per_class)
  {
    if (count < cfg.subset)
    {
      fail(ErrorCode::InvalidArgument, "subset " + std::to_string(cfg.subset) + " exceeds the " +
                                           std::to_string(count) + " images of class " + std::to_string(label) +
                                           " in the " + std::string(to_string(split)) + " split");
    }
  }
  return subset_per_class(images, cfg.subset);
}

ensemble::FeatureProvider make_provider(RunConfig const &cfg, Split split)
{
  struct State
  {
    RunConfig                                          cfg;
    Split                                              split;
    std::optional<featstore::FeatureRegistry>          registry;
    std::map<featstore::LayerKey, featstore::FeatureFile> cache;
  };
  auto state = std::make_shared<State>(State{cfg, split, std::nullopt, {}});

  return [state](featstore::LayerKey const &key, std::span<std::uint64_t const> ids) -> Matrix {
    auto it = state->cache.find(key);
    if (it == state->cache.end())
    {
      std::filesystem::path path;
      if (key == ensemble::kSiftFvKey)
      {
        path = fv_path(state->cfg, state->split);
        if (!std::filesystem::exists(path))
        {
          fail(ErrorCode::Registry, "no Fisher vectors at " + path.string() + "; run encode-fv first");
        }
      }
      else
      {
        if (!state->registry)
        {
          state->registry = featstore::FeatureRegistry::scan(state->cfg.feat_dir);
        }
        auto found = state->registry->find(key, state->split);
        if (!found)
        {
          fail(ErrorCode::Registry, "no " + std::string(to_string(state->split)) + " features for " +
                                        key.to_string() + " under " + state->cfg.feat_dir.string());
        }
        path = *found;
      }
      it = state->cache.emplace(key, featstore::read_features(path)).first;
    }

    auto const &ff = it->second;
    Matrix      out(ids.size(), ff.dim);
    for (std::size_t i = 0; i < ids.size(); ++i)
    {
      auto const pos = std::lower_bound(ff.ids.begin(), ff.ids.end(), ids[i]);
      if (pos == ff.ids.end() || *pos != ids[i])
      {
        fail(ErrorCode::IncompleteInput, key.to_string() + ": no row for image " + std::to_string(ids[i]));
      }
      auto const src = ff.row(static_cast<std::size_t>(pos - ff.ids.begin()));
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  };
}

ExtractStats extract_sift(RunConfig const &cfg, Split split)
{
  return stage("extract-sift", [&] {
    auto images = load_split(cfg, split);
    std::sort(images.begin(), images.end(), [](auto const &a, auto const &b) { return a.id < b.id; });

    std::vector<sift::DescriptorSet> sets(images.size());
    parallel_for(images.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
      {
        sets[i] = sift::extract_sift(preprocess(images[i], cfg.upscale), {}, images[i].id);
      }
    });

    featstore::FeatureFile ff;
    ff.model_name = "sift";
    ff.layer_id   = 0;
    ff.dim        = static_cast<std::uint32_t>(sift::kDescriptorDim);
    ExtractStats stats;
    stats.images = images.size();
    for (auto const &set : sets)
    {
      auto const n = set.descriptors.rows();
      if (n >= (std::size_t{1} << kRowBits))
      {
        fail(ErrorCode::Internal, "image " + std::to_string(set.image_id) + " has too many descriptors");
      }
      for (std::size_t r = 0; r < n; ++r)
      {
        ff.ids.push_back((static_cast<std::uint64_t>(set.image_id) << kRowBits) | r);
        for (double v : set.descriptors.row(r))
        {
          ff.rows.push_back(static_cast<float>(v));
        }
      }
      stats.descriptors += n;
      stats.dense += set.dense ? 1 : 0;
    }
    featstore::write_features(ff, sift_path(cfg, split));
    return stats;
  });
}

codebook::EmResult train_gmm(RunConfig const &cfg)
{
  return stage("train-gmm", [&] {
    auto const data = to_matrix(featstore::read_features(sift_path(cfg, Split::Train)));

    codebook::TrainOptions opts;
    opts.components  = cfg.gmm_components;
    opts.seed        = cfg.seed;
    opts.max_iter    = cfg.em_max_iter;
    opts.max_samples = cfg.gmm_max_samples;
    opts.threads     = cfg.threads;
    auto result      = codebook::train_gmm(data, opts);
    codebook::save_gmm(result.params, gmm_path(cfg));

    std::string trace;
    for (std::size_t i = 0; i < result.trace.size(); ++i)
    {
      trace += std::to_string(i) + " " + format_double(result.trace[i]) + "\n";
    }
    write_text(cfg.work_dir / "gmm_trace.txt", trace);
    return result;
  });
}

std::size_t encode_fv(RunConfig const &cfg, Split split)
{
  return stage("encode-fv", [&] {
    auto const gmm = codebook::load_gmm(gmm_path(cfg));
    auto const ff  = featstore::read_features(sift_path(cfg, split));

    // Rows are grouped by image because ids are sorted.
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t r = 0; r < ff.count(); ++r)
    {
      if (groups.empty() || (ff.ids[r] >> kRowBits) != (ff.ids[groups.back().first] >> kRowBits))
      {
        groups.emplace_back(r, r);
      }
      groups.back().second = r + 1;
    }

    std::vector<std::vector<double>> fvs(groups.size());
    parallel_for(groups.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t g = begin; g < end; ++g)
      {
        auto const [first, last] = groups[g];
        Matrix descriptors(last - first, ff.dim);
        for (std::size_t r = first; r < last; ++r)
        {
          auto const src = ff.row(r);
          std::copy(src.begin(), src.end(), descriptors.row(r - first).begin());
        }
        fvs[g] = fisher::encode_normalized(gmm, descriptors).values;
      }
    });

    featstore::FeatureFile out;
    out.model_name = ensemble::kSiftFvKey.model;
    out.layer_id   = ensemble::kSiftFvKey.layer;
    out.dim        = static_cast<std::uint32_t>(2 * gmm.components() * gmm.dim());
    for (std::size_t g = 0; g < groups.size(); ++g)
    {
      out.ids.push_back(ff.ids[groups[g].first] >> kRowBits);
      for (double v : fvs[g])
      {
        out.rows.push_back(static_cast<float>(v));
      }
    }
    featstore::write_features(out, fv_path(cfg, split));
    return groups.size();
  });
}

void fit_pca(RunConfig const &cfg, std::string const &only)
{
  stage("fit-pca", [&] {
    auto const  config   = load_run_ensemble(cfg);
    auto const *selected = find_stream(config, only);
    auto const  images   = load_split(cfg, Split::Train);
    auto const  ids      = ids_of(images);
    auto const  provider = make_provider(cfg, Split::Train);
    for (auto const &stream : config.streams)
    {
      if ((selected != nullptr && selected != &stream) || stream.pca_target == 0)
      {
        continue;
      }
      try
      {
        auto const raw = ensemble::assemble_raw(stream, provider, ids);
        pca::save_pca(pca::fit_pca(raw, stream.pca_target), pca_file(cfg, stream.name));
      }
      catch (Error const &e)
      {
        throw e.within("stream '" + stream.name + "'");
      }
    }
    return 0;
  });
}

void train_svm(RunConfig const &cfg, std::string const &only)
{
  stage("train-svm", [&] {
    auto const  config   = load_run_ensemble(cfg);
    auto const *selected = find_stream(config, only);
    auto const  images   = load_split(cfg, Split::Train);
    auto const  ids      = ids_of(images);
    auto const  labels   = labels_of(images);
    auto const  table    = label_table(labels);
    auto const  provider = make_provider(cfg, Split::Train);

    svm::OvrOptions ovr;
    ovr.epochs  = cfg.svm_epochs;
    ovr.seed    = cfg.seed;
    ovr.threads = cfg.threads;

    for (auto const &configured : config.streams)
    {
      if (selected != nullptr && selected != &configured)
      {
        continue;
      }
      try
      {
        ensemble::EnsembleMember member;
        member.stream  = configured;
        auto &stream   = member.stream;
        Matrix raw     = ensemble::assemble_raw(stream, provider, ids);
        stream.raw_dim = raw.cols();
        Matrix features;
        if (stream.pca_target > 0)
        {
          auto const path = pca_file(cfg, stream.name);
          if (!std::filesystem::exists(path))
          {
            fail(ErrorCode::Io, "missing " + path.string() + "; run fit-pca first");
          }
          stream.pca = pca::load_pca(path);
          if (stream.pca->dim() != raw.cols() || stream.pca->target() != stream.pca_target)
          {
            fail(ErrorCode::Consistency, "PCA model does not match the stream; rerun fit-pca");
          }
          features = pca::project_rows(*stream.pca, raw);
        }
        else
        {
          features = std::move(raw);
        }
        ensemble::l2_normalize_rows(features);

        member.C          = svm::select_c(features, labels, config.c_grid, 3, ovr);
        member.classifier = svm::train_ovr(features, labels, member.C, table, ovr);
        for (auto &m : member.classifier.models)
        {
          m.feature_tag = stream.name;
        }
        ensemble::save_member(member, model_dir(cfg));
      }
      catch (Error const &e)
      {
        throw e.within("stream '" + configured.name + "'");
      }
    }
    return 0;
  });
}

ensemble::EnsembleModel train_ensemble(RunConfig const &cfg)
{
  return stage("train-ensemble", [&] {
    auto const config = load_run_ensemble(cfg);
    auto const images = load_split(cfg, Split::Train);
    auto const labels = labels_of(images);

    ensemble::EnsembleModel model;
    model.labels    = label_table(labels);
    model.tie_break = config.tie_policy;
    bool any_vote   = false;
    for (auto const &stream : config.streams)
    {
      auto member = ensemble::load_member(model_dir(cfg), stream.name);
      if (member.stream.source_text() != stream.source_text() || member.stream.pca_target != stream.pca_target)
      {
        fail(ErrorCode::Consistency, "stream '" + stream.name + "' changed since train-svm; rerun it");
      }
      if (member.classifier.labels != model.labels)
      {
        fail(ErrorCode::Consistency, "stream '" + stream.name + "' was trained on different labels");
      }
      member.stream.votes = stream.votes;
      any_vote            = any_vote || stream.votes;
      model.members.push_back(std::move(member));
    }
    if (!any_vote)
    {
      fail(ErrorCode::DegenerateEnsemble, "no stream takes part in the vote");
    }
    ensemble::save_ensemble(model, model_dir(cfg));
    return model;
  });
}

Evaluation evaluate(std::span<std::uint32_t const> preds, std::span<std::uint32_t const> truth)
{
  if (preds.size() != truth.size())
  {
    fail(ErrorCode::InvalidArgument, "evaluate: " + std::to_string(preds.size()) + " predictions for " +
                                         std::to_string(truth.size()) + " labels");
  }
  Evaluation ev;
  ev.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i)
  {
    if (preds[i] >= kCifarClasses || truth[i] >= kCifarClasses)
    {
      fail(ErrorCode::InvalidArgument, "evaluate: label outside 0..9");
    }
    ++ev.confusion[truth[i]][preds[i]];
    ev.correct += preds[i] == truth[i] ? 1 : 0;
  }
  ev.accuracy = ev.total == 0 ? 0.0 : 100.0 * static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  return ev;
}

std::string display_name(ensemble::FeatureStream const &stream)
{
  switch (stream.kind)
  {
  case ensemble::StreamKind::SiftFv:
    return kSiftRow;
  case ensemble::StreamKind::Deep:
    return model_display(stream.layers.front().model) + " (" + std::to_string(stream.layers.front().layer) + ")";
  case ensemble::StreamKind::Fused:
  {
    auto layers = stream.layers;
    std::sort(layers.begin(), layers.end());
    bool const same_model = std::all_of(layers.begin(), layers.end(),
                                        [&](auto const &k) { return k.model == layers.front().model; });
    std::string out;
    if (same_model)
    {
      out = model_display(layers.front().model) + " (";
      for (auto const &k : layers)
      {
        out += std::to_string(k.layer);
      }
      return out + ")";
    }
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
      out += (i ? " + " : "") + model_display(layers[i].model) + " (" + std::to_string(layers[i].layer) + ")";
    }
    return out;
  }
  }
  return stream.name;
}

void sort_rows(std::vector<ReportRow> &rows)
{
  static std::regex const pattern(R"(^(\S+) \((\d+)\)$)");
  auto                    rank = [](std::string const &name) {
    if (name == kSiftRow)
    {
      return std::tuple{5, 0L};
    }
    if (name == kDeepEnsemble)
    {
      return std::tuple{6, 0L};
    }
    if (name == kSiftDeepEnsemble)
    {
      return std::tuple{7, 0L};
    }
    if (name == kEnsemble)
    {
      return std::tuple{8, 0L};
    }
    std::smatch m;
    if (std::regex_match(name, m, pattern))
    {
      bool const single = m[2].length() == 1;
      long const layer  = single ? -std::stol(m[2].str()) : 0L;
      if (m[1] == "VGGNet")
      {
        return std::tuple{single ? 0 : 2, layer};
      }
      if (m[1] == "AlexNet")
      {
        return std::tuple{single ? 1 : 3, layer};
      }
    }
    return std::tuple{4, 0L};
  };
  std::stable_sort(rows.begin(), rows.end(), [&](ReportRow const &a, ReportRow const &b) {
    auto const ra = rank(a.name);
    auto const rb = rank(b.name);
    if (ra != rb)
    {
      return ra < rb;
    }
    return a.name < b.name;
  });
}

void record(EvalReport &report, std::string const &name, bool reduced, double accuracy)
{
  auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](auto const &r) { return r.name == name; });
  if (it == report.rows.end())
  {
    report.rows.push_back({name, std::nullopt, std::nullopt});
    it = std::prev(report.rows.end());
  }
  (reduced ? it->pca_svm : it->svm) = accuracy;
  sort_rows(report.rows);
}

std::string render_text(EvalReport const &report)
{
  auto rows = report.rows;
  sort_rows(rows);

  std::string const head = "CNN Model (Layer)";
  std::size_t       w    = head.size();
  for (auto const &r : rows)
  {
    w = std::max(w, r.name.size());
  }
  w += 2;

  auto cell = [](std::optional<double> v, int width) {
    char buf[64];
    if (v)
    {
      std::snprintf(buf, sizeof buf, "%*.2f", width, *v);
    }
    else
    {
      std::snprintf(buf, sizeof buf, "%*s", width, "-");
    }
    return std::string(buf);
  };

  std::ostringstream out;
  out << "Classification accuracy (%), seed " << report.seed << "\n\n";
  out << head << std::string(w - head.size(), ' ') << "  Accuracy (SVM)  Accuracy (PCA+SVM)\n";
  out << std::string(w + 36, '-') << "\n";
  for (auto const &r : rows)
  {
    out << r.name << std::string(w - r.name.size(), ' ') << cell(r.svm, 16) << cell(r.pca_svm, 20) << "\n";
  }

  auto const &ev = report.ensemble;
  if (ev.total > 0)
  {
    out << "\nEnsemble: " << ev.correct << " of " << ev.total << " correct\n";
    out << "Confusion matrix (rows: true class, columns: predicted)\n";
    out << "     ";
    for (std::size_t p = 0; p < kCifarClasses; ++p)
    {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%7zu", p);
      out << buf;
    }
    out << "\n";
    for (std::size_t t = 0; t < kCifarClasses; ++t)
    {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%5zu", t);
      out << buf;
      for (std::size_t p = 0; p < kCifarClasses; ++p)
      {
        std::snprintf(buf, sizeof buf, "%7llu", static_cast<unsigned long long>(ev.confusion[t][p]));
        out << buf;
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string render_csv(EvalReport const &report)
{
  auto rows = report.rows;
  sort_rows(rows);

  std::ostringstream out;
  out << "seed," << report.seed << "\n";
  for (auto const &r : rows)
  {
    out << "row," << r.name << "," << (r.svm ? format_double(*r.svm) : "") << ","
        << (r.pca_svm ? format_double(*r.pca_svm) : "") << "\n";
  }
  auto const &ev = report.ensemble;
  out << "ensemble," << ev.correct << "," << ev.total << "\n";
  for (std::size_t t = 0; t < kCifarClasses; ++t)
  {
    out << "confusion," << t;
    for (std::size_t p = 0; p < kCifarClasses; ++p)
    {
      out << "," << ev.confusion[t][p];
    }
    out << "\n";
  }
  return out.str();
}

EvalReport parse_csv(std::string_view text)
{
  EvalReport         report;
  std::istringstream in{std::string(text)};
  std::string        line;
  while (std::getline(in, line))
  {
    if (line.empty() || line == "\r")
    {
      continue;
    }
    auto const f = split_csv(line);
    if (f[0] == "seed" && f.size() == 2)
    {
      report.seed = csv_uint(f[1]);
    }
    else if (f[0] == "row" && f.size() == 4)
    {
      ReportRow row{f[1], std::nullopt, std::nullopt};
      if (!f[2].empty())
      {
        row.svm = csv_double(f[2]);
      }
      if (!f[3].empty())
      {
        row.pca_svm = csv_double(f[3]);
      }
      report.rows.push_back(std::move(row));
    }
    else if (f[0] == "ensemble" && f.size() == 3)
    {
      report.ensemble.correct = csv_uint(f[1]);
      report.ensemble.total   = csv_uint(f[2]);
      report.ensemble.accuracy =
          report.ensemble.total == 0
              ? 0.0
              : 100.0 * static_cast<double>(report.ensemble.correct) / static_cast<double>(report.ensemble.total);
    }
    else if (f[0] == "confusion" && f.size() == kCifarClasses + 2)
    {
      auto const t = csv_uint(f[1]);
      if (t >= kCifarClasses)
      {
        fail(ErrorCode::Format, "confusion row " + f[1] + " out of range");
      }
      for (std::size_t p = 0; p < kCifarClasses; ++p)
      {
        report.ensemble.confusion[t][p] = csv_uint(f[p + 2]);
      }
    }
    else
    {
      fail(ErrorCode::Format, "unrecognized report CSV line '" + line + "'");
    }
  }
  sort_rows(report.rows);
  return report;
}

void emit_report(EvalReport const &report, std::filesystem::path const &dir)
{
  write_text(dir / "report.txt", render_text(report));
  write_text(dir / "report.csv", render_csv(report));
}

EvalReport evaluate_stage(RunConfig const &cfg)
{
  return stage("evaluate", [&] {
    auto const model  = ensemble::load_ensemble(model_dir(cfg));
    auto const images = load_split(cfg, Split::Test);
    auto const ids    = ids_of(images);
    auto const truth  = labels_of(images);
    auto const provider = make_provider(cfg, Split::Test);

    std::size_t const n = images.size();
    std::size_t const m = model.members.size();
    std::vector<std::vector<ensemble::MemberOutput>> outputs(n, std::vector<ensemble::MemberOutput>(m));
    for (std::size_t c = 0; c < m; ++c)
    {
      auto const &member = model.members[c];
      try
      {
        auto const raw = ensemble::assemble_raw(member.stream, provider, ids);
        parallel_for(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i)
          {
            auto const x = ensemble::prepare(member.stream, raw.row(i));
            auto      &o = outputs[i][c];
            o.decision   = svm::decision_values(member.classifier, x);
            o.vote       = svm::predict_index(member.classifier, x);
          }
        });
      }
      catch (Error const &e)
      {
        throw e.within("stream '" + member.stream.name + "'");
      }
    }

    EvalReport report;
    report.seed = cfg.seed;
    std::vector<std::uint32_t> preds(n);
    for (std::size_t c = 0; c < m; ++c)
    {
      for (std::size_t i = 0; i < n; ++i)
      {
        preds[i] = model.labels[outputs[i][c].vote];
      }
      auto const &stream = model.members[c].stream;
      record(report, display_name(stream), stream.pca_target > 0, evaluate(preds, truth).accuracy);
    }

    bool has_sift = false;
    bool has_deep = false;
    for (auto const &member : model.members)
    {
      if (member.stream.votes)
      {
        (member.stream.kind == ensemble::StreamKind::SiftFv ? has_sift : has_deep) = true;
      }
    }

    // Deep-only vote alongside the full one when SIFT also votes.
    if (has_sift && has_deep)
    {
      auto deep_only = model;
      for (auto &member : deep_only.members)
      {
        member.stream.votes = member.stream.votes && member.stream.kind != ensemble::StreamKind::SiftFv;
      }
      for (std::size_t i = 0; i < n; ++i)
      {
        preds[i] = model.labels[ensemble::vote_index(deep_only, outputs[i])];
      }
      record(report, kDeepEnsemble, false, evaluate(preds, truth).accuracy);
    }

    std::ostringstream votes;
    votes << "id,truth,predicted";
    for (auto const &member : model.members)
    {
      votes << "," << (member.stream.votes ? "vote:" : "aux:") << member.stream.name;
    }
    for (auto l : model.labels)
    {
      votes << ",sum:" << l;
    }
    votes << "\n";
    for (std::size_t i = 0; i < n; ++i)
    {
      preds[i] = model.labels[ensemble::vote_index(model, outputs[i])];
      votes << ids[i] << "," << truth[i] << "," << preds[i];
      for (std::size_t c = 0; c < m; ++c)
      {
        votes << "," << model.labels[outputs[i][c].vote];
      }
      for (std::size_t k = 0; k < model.labels.size(); ++k)
      {
        std::vector<double> column;
        for (std::size_t c = 0; c < m; ++c)
        {
          if (model.members[c].stream.votes)
          {
            column.push_back(outputs[i][c].decision[k]);
          }
        }
        std::sort(column.begin(), column.end());
        double sum = 0.0;
        for (double v : column)
        {
          sum += v;
        }
        votes << "," << format_double(sum);
      }
      votes << "\n";
    }

    report.ensemble = evaluate(preds, truth);
    char const *name = has_sift && has_deep ? kSiftDeepEnsemble : (has_deep ? kDeepEnsemble : kEnsemble);
    record(report, name, false, report.ensemble.accuracy);

    emit_report(report, cfg.work_dir);
    write_text(cfg.work_dir / "votes.csv", votes.str());
    return report;
  });
}

std::string report_stage(RunConfig const &cfg)
{
  return stage("report", [&] {
    auto const text = render_text(parse_csv(read_text(cfg.work_dir / "report.csv")));
    write_text(cfg.work_dir / "report.txt", text);
    return text;
  });
}

EvalReport run_pipeline(RunConfig const &cfg)
{
  std::vector<std::pair<std::string, double>> timings;
  auto timed = [&](std::string const &name, auto &&fn) {
    auto const start = Clock::now();
    fn();
    timings.emplace_back(name, seconds_since(start));
  };
  auto const config = stage("config", [&] { return load_run_ensemble(cfg); });
  auto const exists = [&](std::filesystem::path const &p) { return cfg.resume && std::filesystem::exists(p); };

  if (uses_sift(config))
  {
    for (auto split : {Split::Train, Split::Test})
    {
      if (!exists(sift_path(cfg, split)))
      {
        timed("extract-sift " + std::string(to_string(split)), [&] { extract_sift(cfg, split); });
      }
    }
    if (!exists(gmm_path(cfg)))
    {
      timed("train-gmm", [&] { train_gmm(cfg); });
    }
    for (auto split : {Split::Train, Split::Test})
    {
      if (!exists(fv_path(cfg, split)))
      {
        timed("encode-fv " + std::string(to_string(split)), [&] { encode_fv(cfg, split); });
      }
    }
  }
  for (auto const &stream : config.streams)
  {
    if (stream.pca_target > 0 && !exists(pca_file(cfg, stream.name)))
    {
      timed("fit-pca " + stream.name, [&] { fit_pca(cfg, stream.name); });
    }
  }
  timed("train-svm", [&] { train_svm(cfg); });
  timed("train-ensemble", [&] { train_ensemble(cfg); });
  EvalReport report;
  timed("evaluate", [&] { report = evaluate_stage(cfg); });

  std::string text;
  for (auto const &[name, secs] : timings)
  {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-24s %10.3f\n", name.c_str(), secs);
    text += buf;
  }
  write_text(cfg.work_dir / "timing.txt", text);
  report.timings = std::move(timings);
  return report;
}

}  // namespace ensvis::pipeline
