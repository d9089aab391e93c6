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

#include "ensvis/ensemble.hpp"

#include "ensvis/binio.hpp"
#include "ensvis/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ensvis::ensemble {

namespace {

std::string trim(std::string_view s)
{
  auto const b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
  {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(std::string const &s)
{
  std::istringstream       in(s);
  std::vector<std::string> out;
  std::string              tok;
  while (in >> tok)
  {
    out.push_back(tok);
  }
  return out;
}

std::vector<std::string> split_on(std::string const &s, char sep)
{
  std::vector<std::string> out;
  std::string              cur;
  for (char c : s)
  {
    if (c == sep)
    {
      out.push_back(trim(cur));
      cur.clear();
    }
    else
    {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string const &s, std::string const &what)
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
  fail(ErrorCode::InvalidArgument, "bad " + what + " '" + s + "'");
}

std::size_t parse_size(std::string const &s, std::string const &what)
{
  try
  {
    std::size_t used = 0;
    auto        v    = std::stoull(s, &used);
    if (used == s.size() && s.front() != '-')
    {
      return static_cast<std::size_t>(v);
    }
  }
  catch (std::exception const &)
  {}
  fail(ErrorCode::InvalidArgument, "bad " + what + " '" + s + "'");
}

bool valid_stream_name(std::string const &name)
{
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+';
  });
}

void parse_source(std::string const &text, FeatureStream &stream)
{
  if (text == "sift-fv")
  {
    stream.kind = StreamKind::SiftFv;
    stream.layers.clear();
    return;
  }
  auto const colon = text.find(':');
  if (colon == std::string::npos)
  {
    fail(ErrorCode::InvalidArgument, "unknown stream source '" + text + "'");
  }
  auto const kind = text.substr(0, colon);
  auto const rest = text.substr(colon + 1);
  if (kind == "deep")
  {
    stream.kind   = StreamKind::Deep;
    stream.layers = {featstore::parse_layer_key(rest)};
  }
  else if (kind == "fused")
  {
    stream.kind = StreamKind::Fused;
    stream.layers.clear();
    for (auto const &part : split_on(rest, ','))
    {
      stream.layers.push_back(featstore::parse_layer_key(part));
    }
    if (stream.layers.size() < 2)
    {
      fail(ErrorCode::InvalidArgument, "fused stream needs at least two layers: '" + text + "'");
    }
  }
  else
  {
    fail(ErrorCode::InvalidArgument, "unknown stream source kind '" + kind + "'");
  }
}

// `<name> <source> [key=value ...]`. Unknown keys are rejected; `extra`
// receives keys the caller handles itself.
FeatureStream parse_stream_tokens(std::vector<std::string> const &tokens,
                                  std::map<std::string, std::string> *extra)
{
  if (tokens.size() < 2)
  {
    fail(ErrorCode::InvalidArgument, "stream needs a name and a source");
  }
  FeatureStream stream;
  stream.name = tokens[0];
  if (!valid_stream_name(stream.name))
  {
    fail(ErrorCode::InvalidArgument, "bad stream name '" + stream.name + "'");
  }
  parse_source(tokens[1], stream);
  for (std::size_t i = 2; i < tokens.size(); ++i)
  {
    auto const eq = tokens[i].find('=');
    if (eq == std::string::npos)
    {
      fail(ErrorCode::InvalidArgument, "expected key=value, got '" + tokens[i] + "'");
    }
    auto const key   = tokens[i].substr(0, eq);
    auto const value = tokens[i].substr(eq + 1);
    if (key == "pca")
    {
      stream.pca_target = parse_size(value, "pca target");
    }
    else if (key == "vote")
    {
      if (value != "yes" && value != "no")
      {
        fail(ErrorCode::InvalidArgument, "vote must be yes or no");
      }
      stream.votes = value == "yes";
    }
    else if (extra != nullptr)
    {
      (*extra)[key] = value;
    }
    else
    {
      fail(ErrorCode::InvalidArgument, "unknown stream option '" + key + "'");
    }
  }
  if (stream.kind == StreamKind::Fused && stream.pca_target == 0)
  {
    fail(ErrorCode::InvalidArgument, "fused stream '" + stream.name + "' needs pca=<q>");
  }
  return stream;
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

EnsembleMember parse_member_line(std::string const &line, std::filesystem::path const &dir)
{
  auto tokens = split_ws(line);
  if (tokens.empty() || tokens.front() != "member")
  {
    fail(ErrorCode::Format, "expected a member line, got '" + line + "'");
  }
  tokens.erase(tokens.begin());
  std::map<std::string, std::string> extra;
  EnsembleMember                     member;
  member.stream = parse_stream_tokens(tokens, &extra);
  if (!extra.contains("raw_dim") || !extra.contains("C"))
  {
    fail(ErrorCode::Format, "member line lacks raw_dim or C: '" + line + "'");
  }
  member.stream.raw_dim = parse_size(extra["raw_dim"], "raw_dim");
  member.C              = parse_double(extra["C"], "C");

  member.classifier = svm::load_model(dir / (member.stream.name + ".svm"));
  if (member.stream.pca_target > 0)
  {
    member.stream.pca = pca::load_pca(dir / (member.stream.name + ".pca"));
  }
  return member;
}

}  // namespace

std::string_view to_string(TiePolicy policy) noexcept
{
  return policy == TiePolicy::LowestIndex ? "lowest-index" : "max-confidence-sum";
}

TiePolicy parse_tie_policy(std::string_view text)
{
  if (text == "lowest-index")
  {
    return TiePolicy::LowestIndex;
  }
  if (text == "max-confidence-sum")
  {
    return TiePolicy::MaxConfidenceSum;
  }
  fail(ErrorCode::InvalidArgument, "unknown tie policy '" + std::string(text) + "'");
}

std::vector<featstore::LayerKey> FeatureStream::sources() const
{
  if (kind == StreamKind::SiftFv)
  {
    return {kSiftFvKey};
  }
  return layers;
}

std::string FeatureStream::source_text() const
{
  switch (kind)
  {
  case StreamKind::SiftFv:
    return "sift-fv";
  case StreamKind::Deep:
    return "deep:" + layers.front().to_string();
  case StreamKind::Fused:
  {
    std::string out = "fused:";
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
      out += (i ? "," : "") + layers[i].to_string();
    }
    return out;
  }
  }
  return {};
}

EnsembleConfig parse_config(std::string_view text)
{
  EnsembleConfig     config;
  config.streams.clear();
  std::istringstream in{std::string(text)};
  std::string        line;
  int                line_no = 0;
  std::set<std::string> names;
  while (std::getline(in, line))
  {
    ++line_no;
    if (auto const hash = line.find('#'); hash != std::string::npos)
    {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string::npos)
    {
      fail(ErrorCode::InvalidArgument, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto const key   = trim(line.substr(0, eq));
    auto const value = trim(line.substr(eq + 1));
    try
    {
      if (key == "stream")
      {
        auto stream = parse_stream_tokens(split_ws(value), nullptr);
        if (!names.insert(stream.name).second)
        {
          fail(ErrorCode::InvalidArgument, "duplicate stream name '" + stream.name + "'");
        }
        config.streams.push_back(std::move(stream));
      }
      else if (key == "tie_policy")
      {
        config.tie_policy = parse_tie_policy(value);
      }
      else if (key == "c_grid")
      {
        config.c_grid.clear();
        for (auto const &part : split_on(value, ','))
        {
          double const c = parse_double(part, "C value");
          if (!(c > 0.0))
          {
            fail(ErrorCode::InvalidArgument, "C values must be positive");
          }
          config.c_grid.push_back(c);
        }
      }
      else
      {
        fail(ErrorCode::InvalidArgument, "unknown key '" + key + "'");
      }
    }
    catch (Error const &e)
    {
      throw e.within("config line " + std::to_string(line_no));
    }
  }
  if (config.streams.empty())
  {
    fail(ErrorCode::InvalidArgument, "config declares no streams");
  }
  return config;
}

EnsembleConfig load_config(std::filesystem::path const &path)
{
  return parse_config(read_text(path));
}

EnsembleConfig default_config()
{
  return parse_config("stream = sift sift-fv\n");
}

std::string format_config(EnsembleConfig const &config)
{
  std::ostringstream out;
  out << "tie_policy = " << to_string(config.tie_policy) << "\n";
  out << "c_grid = ";
  for (std::size_t i = 0; i < config.c_grid.size(); ++i)
  {
    out << (i ? ", " : "") << format_double(config.c_grid[i]);
  }
  out << "\n";
  for (auto const &s : config.streams)
  {
    out << "stream = " << s.name << " " << s.source_text();
    if (s.pca_target > 0)
    {
      out << " pca=" << s.pca_target;
    }
    if (!s.votes)
    {
      out << " vote=no";
    }
    out << "\n";
  }
  return out.str();
}

void l2_normalize(std::span<double> v)
{
  double sq = 0.0;
  for (double x : v)
  {
    sq += x * x;
  }
  if (sq > 0.0)
  {
    double const inv = 1.0 / std::sqrt(sq);
    for (auto &x : v)
    {
      x *= inv;
    }
  }
}

void l2_normalize_rows(Matrix &m)
{
  for (std::size_t r = 0; r < m.rows(); ++r)
  {
    l2_normalize(m.row(r));
  }
}

Matrix assemble_raw(FeatureStream const &stream, FeatureProvider const &provider,
                    std::span<std::uint64_t const> ids)
{
  auto const sources = stream.sources();
  if (sources.size() == 1)
  {
    auto m = provider(sources.front(), ids);
    if (m.rows() != ids.size())
    {
      fail(ErrorCode::IncompleteInput, "stream '" + stream.name + "' returned wrong row count");
    }
    return m;
  }

  std::vector<Matrix> blocks;
  std::size_t         total = 0;
  for (auto const &key : sources)
  {
    auto m = provider(key, ids);
    if (m.rows() != ids.size())
    {
      fail(ErrorCode::IncompleteInput, "stream '" + stream.name + "' layer " + key.to_string() +
                                           " returned wrong row count");
    }
    l2_normalize_rows(m);
    total += m.cols();
    blocks.push_back(std::move(m));
  }
  Matrix out(ids.size(), total);
  for (std::size_t r = 0; r < ids.size(); ++r)
  {
    auto dst = out.row(r).begin();
    for (auto const &b : blocks)
    {
      dst = std::copy(b.row(r).begin(), b.row(r).end(), dst);
    }
  }
  return out;
}

std::vector<double> prepare(FeatureStream const &stream, std::span<double const> raw)
{
  if (stream.raw_dim != 0 && raw.size() != stream.raw_dim)
  {
    fail(ErrorCode::Consistency, "stream '" + stream.name + "' expects dimension " +
                                     std::to_string(stream.raw_dim) + ", got " + std::to_string(raw.size()));
  }
  std::vector<double> out;
  if (stream.pca)
  {
    out = pca::project(*stream.pca, raw);
  }
  else
  {
    out.assign(raw.begin(), raw.end());
  }
  l2_normalize(out);
  return out;
}

EnsembleMember train_member(FeatureStream stream, FeatureProvider const &provider,
                            std::span<std::uint64_t const> ids, std::span<std::uint32_t const> labels,
                            std::span<std::uint32_t const> label_table, TrainOptions const &opts)
{
  try
  {
    if (stream.kind == StreamKind::Fused && stream.pca_target == 0)
    {
      fail(ErrorCode::InvalidArgument, "fused streams need a PCA target");
    }
    Matrix raw     = assemble_raw(stream, provider, ids);
    stream.raw_dim = raw.cols();
    stream.pca.reset();

    Matrix features;
    if (stream.pca_target > 0)
    {
      stream.pca = pca::fit_pca(raw, stream.pca_target);
      features   = pca::project_rows(*stream.pca, raw);
    }
    else
    {
      features = std::move(raw);
    }
    l2_normalize_rows(features);

    EnsembleMember member;
    member.C          = svm::select_c(features, labels, opts.c_grid, opts.cv_folds, opts.ovr);
    member.classifier = svm::train_ovr(features, labels, member.C, label_table, opts.ovr);
    for (auto &m : member.classifier.models)
    {
      m.feature_tag = stream.name;
    }
    member.stream = std::move(stream);
    return member;
  }
  catch (Error const &e)
  {
    throw e.within("stream '" + stream.name + "'");
  }
}

EnsembleModel train_ensemble(EnsembleConfig const &config, FeatureProvider const &provider,
                             std::span<std::uint64_t const> ids, std::span<std::uint32_t const> labels,
                             TrainOptions const &opts)
{
  if (config.streams.empty())
  {
    fail(ErrorCode::DegenerateEnsemble, "ensemble has no streams");
  }
  std::set<std::uint32_t> const distinct(labels.begin(), labels.end());
  EnsembleModel                 model;
  model.labels.assign(distinct.begin(), distinct.end());
  model.tie_break = config.tie_policy;
  for (auto const &stream : config.streams)
  {
    model.members.push_back(train_member(stream, provider, ids, labels, model.labels, opts));
  }
  return model;
}

std::size_t majority_vote(std::span<std::size_t const> votes, Matrix const &confidences,
                          std::size_t num_classes, TiePolicy policy)
{
  if (votes.empty())
  {
    fail(ErrorCode::DegenerateEnsemble, "majority vote over zero members");
  }
  bool const use_conf = policy == TiePolicy::MaxConfidenceSum;
  if (use_conf && (confidences.rows() != votes.size() || confidences.cols() != num_classes))
  {
    fail(ErrorCode::InvalidArgument, "confidences must be members x classes");
  }

  std::vector<std::size_t> counts(num_classes, 0);
  for (auto v : votes)
  {
    if (v >= num_classes)
    {
      fail(ErrorCode::InvalidArgument, "vote " + std::to_string(v) + " outside class range");
    }
    ++counts[v];
  }
  std::size_t const        top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> tied;
  for (std::size_t k = 0; k < num_classes; ++k)
  {
    if (counts[k] == top)
    {
      tied.push_back(k);
    }
  }
  if (tied.size() == 1 || !use_conf)
  {
    return tied.front();
  }

  // Sum each class column in sorted order so member order cannot matter.
  std::size_t best     = tied.front();
  double      best_sum = 0.0;
  bool        first    = true;
  for (auto k : tied)
  {
    std::vector<double> column(confidences.rows());
    for (std::size_t c = 0; c < confidences.rows(); ++c)
    {
      column[c] = confidences(c, k);
    }
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column)
    {
      sum += v;
    }
    if (first || sum > best_sum)
    {
      best     = k;
      best_sum = sum;
      first    = false;
    }
  }
  return best;
}

std::vector<MemberOutput> member_outputs(EnsembleModel const &model, StreamInputs const &inputs)
{
  std::vector<MemberOutput> out;
  out.reserve(model.members.size());
  for (auto const &member : model.members)
  {
    auto const it = inputs.find(member.stream.name);
    if (it == inputs.end())
    {
      fail(ErrorCode::IncompleteInput, "no features for stream '" + member.stream.name + "'");
    }
    auto const   x = prepare(member.stream, it->second);
    MemberOutput o;
    o.decision = svm::decision_values(member.classifier, x);
    o.vote     = static_cast<std::size_t>(std::max_element(o.decision.begin(), o.decision.end()) -
                                      o.decision.begin());
    out.push_back(std::move(o));
  }
  return out;
}

std::size_t vote_index(EnsembleModel const &model, std::span<MemberOutput const> outputs)
{
  std::vector<std::size_t> votes;
  Matrix                   conf(0, model.labels.size());
  for (std::size_t c = 0; c < model.members.size(); ++c)
  {
    if (!model.members[c].stream.votes)
    {
      continue;
    }
    votes.push_back(outputs[c].vote);
    conf.append_row(outputs[c].decision);
  }
  return majority_vote(votes, conf, model.labels.size(), model.tie_break);
}

std::uint32_t predict_ensemble(EnsembleModel const &model, StreamInputs const &inputs)
{
  auto const outputs = member_outputs(model, inputs);
  return model.labels[vote_index(model, outputs)];
}

std::string format_member_line(EnsembleMember const &member)
{
  auto const        &s = member.stream;
  std::ostringstream out;
  out << "member " << s.name << " " << s.source_text() << " pca=" << s.pca_target
      << " vote=" << (s.votes ? "yes" : "no") << " raw_dim=" << s.raw_dim << " C=" << format_double(member.C);
  return out.str();
}

void save_member(EnsembleMember const &member, std::filesystem::path const &dir)
{
  auto const &name = member.stream.name;
  svm::save_model(member.classifier, dir / (name + ".svm"));
  if (member.stream.pca)
  {
    pca::save_pca(*member.stream.pca, dir / (name + ".pca"));
  }
  write_text(dir / (name + ".member"), format_member_line(member) + "\n");
}

EnsembleMember load_member(std::filesystem::path const &dir, std::string const &name)
{
  return parse_member_line(trim(read_text(dir / (name + ".member"))), dir);
}

void save_ensemble(EnsembleModel const &model, std::filesystem::path const &dir)
{
  std::ostringstream manifest;
  manifest << "ensvis-ensemble 1\n";
  manifest << "tie_policy = " << to_string(model.tie_break) << "\n";
  manifest << "labels =";
  for (auto l : model.labels)
  {
    manifest << " " << l;
  }
  manifest << "\n";
  for (auto const &member : model.members)
  {
    save_member(member, dir);
    manifest << format_member_line(member) << "\n";
  }
  write_text(dir / "manifest.txt", manifest.str());
}

EnsembleModel load_ensemble(std::filesystem::path const &dir)
{
  std::istringstream in(read_text(dir / "manifest.txt"));
  std::string        line;
  if (!std::getline(in, line) || trim(line) != "ensvis-ensemble 1")
  {
    fail(ErrorCode::Format, (dir / "manifest.txt").string() + ": missing ensemble header");
  }
  EnsembleModel model;
  bool          have_labels = false;
  while (std::getline(in, line))
  {
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    if (line.rfind("member ", 0) == 0)
    {
      model.members.push_back(parse_member_line(line, dir));
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string::npos)
    {
      fail(ErrorCode::Format, "bad manifest line '" + line + "'");
    }
    auto const key   = trim(line.substr(0, eq));
    auto const value = trim(line.substr(eq + 1));
    if (key == "tie_policy")
    {
      model.tie_break = parse_tie_policy(value);
    }
    else if (key == "labels")
    {
      for (auto const &tok : split_ws(value))
      {
        model.labels.push_back(static_cast<std::uint32_t>(parse_size(tok, "label")));
      }
      have_labels = true;
    }
    else
    {
      fail(ErrorCode::Format, "unknown manifest key '" + key + "'");
    }
  }
  if (!have_labels || model.members.empty())
  {
    fail(ErrorCode::Format, "manifest needs labels and at least one member");
  }
  for (auto const &m : model.members)
  {
    if (m.classifier.labels != model.labels)
    {
      fail(ErrorCode::Consistency, "member '" + m.stream.name + "' has a different label table");
    }
  }
  return model;
}

}  // namespace ensvis::ensemble
