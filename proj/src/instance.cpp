#include "invit/instance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "invit/errors.hpp"
#include "invit/log.hpp"
#include "invit/rng.hpp"

namespace invit {

std::string kind_name(Kind k) { return k == Kind::kTsp ? "tsp" : "cvrp"; }

Kind kind_from_name(const std::string& name) {
  if (name == "tsp") return Kind::kTsp;
  if (name == "cvrp") return Kind::kCvrp;
  throw InputError("unknown problem kind: " + name);
}

std::string dist_name(Dist d) {
  switch (d) {
    case Dist::kUniform: return "uniform";
    case Dist::kClustered: return "clustered";
    case Dist::kExplosion: return "explosion";
    case Dist::kImplosion: return "implosion";
  }
  throw LogicError("bad distribution enum");
}

Dist dist_from_name(const std::string& name) {
  if (name == "uniform") return Dist::kUniform;
  if (name == "clustered") return Dist::kClustered;
  if (name == "explosion") return Dist::kExplosion;
  if (name == "implosion") return Dist::kImplosion;
  throw InputError("unknown distribution: " + name);
}

void Instance::validate() const {
  if (coords.size() < 2) throw InputError("instance needs at least 2 nodes");
  for (const auto& c : coords) {
    if (!std::isfinite(c[0]) || !std::isfinite(c[1]))
      throw InputError("non-finite coordinate in instance");
  }
  if (kind == Kind::kTsp) {
    if (depot >= 0 || !demands.empty())
      throw InputError("tsp instance must not carry depot/demands");
  } else {
    if (depot < 0 || depot >= n()) throw InputError("cvrp depot index out of range");
    if (static_cast<int>(demands.size()) != n())
      throw InputError("cvrp demands size must match node count");
    if (capacity < 1) throw InputError("cvrp capacity must be positive");
    if (demands[static_cast<size_t>(depot)] != 0)
      throw InputError("cvrp depot demand must be 0");
    for (int i = 0; i < n(); ++i) {
      if (i == depot) continue;
      if (demands[static_cast<size_t>(i)] < 0)
        throw InputError("negative demand at node " + std::to_string(i));
      if (demands[static_cast<size_t>(i)] > capacity)
        throw InputError("demand at node " + std::to_string(i) + " exceeds capacity");
    }
  }
}

namespace {

struct Frame {
  double min_x, min_y, scale;
};

Frame rescale_frame(const std::vector<Vec2>& pts) {
  double min_x = pts[0][0], max_x = pts[0][0];
  double min_y = pts[0][1], max_y = pts[0][1];
  for (const auto& p : pts) {
    min_x = std::min(min_x, p[0]);
    max_x = std::max(max_x, p[0]);
    min_y = std::min(min_y, p[1]);
    max_y = std::max(max_y, p[1]);
  }
  const double extent = std::max(max_x - min_x, max_y - min_y);
  if (extent <= 0.0) throw InputError("degenerate instance: all points identical");
  return {min_x, min_y, 1.0 / extent};
}

void apply_frame(std::vector<Vec2>& pts, const Frame& f) {
  for (auto& p : pts) {
    p[0] = (p[0] - f.min_x) * f.scale;
    p[1] = (p[1] - f.min_y) * f.scale;
  }
}

}  // namespace

Instance rescale_unit_square(const Instance& inst) {
  if (inst.coords.size() < 2) throw InputError("rescale needs at least 2 points");
  Instance out = inst;
  apply_frame(out.coords, rescale_frame(out.coords));
  return out;
}

Instance generate(const GenParams& params, Kind kind) {
  const int customers = params.n;
  const int min_customers = kind == Kind::kTsp ? 2 : 1;
  if (customers < min_customers) throw InputError("generate: node count too small");
  if (params.r_min >= params.r_max) throw InputError("generate: need r_min < r_max");
  if (params.lambda <= 0.0) throw InputError("generate: lambda must be positive");
  if (kind == Kind::kCvrp) {
    if (params.capacity < 1) throw InputError("generate: capacity must be positive");
    if (params.demand_lo < 1 || params.demand_lo > params.demand_hi ||
        params.demand_hi > params.capacity)
      throw InputError("generate: bad demand range");
  }

  Rng rng(params.seed);
  Instance inst;
  inst.kind = kind;
  inst.meta["distribution"] = dist_name(params.distribution);
  inst.meta["seed"] = params.seed;

  const bool cvrp = kind == Kind::kCvrp;
  // For CVRP node 0 is the depot; mutations below apply to customers only so
  // the depot keeps its plain uniform law.
  const size_t first_customer = cvrp ? 1 : 0;

  switch (params.distribution) {
    case Dist::kUniform: {
      if (cvrp) inst.coords.push_back({rng.uniform(), rng.uniform()});
      for (int i = 0; i < customers; ++i)
        inst.coords.push_back({rng.uniform(), rng.uniform()});
      break;
    }
    case Dist::kClustered: {
      const bool small = rng.uniform() < 0.5;
      const int n_clusters = small ? 3 : 7;
      const double board = small ? 10.0 : 50.0;
      std::vector<Vec2> centers(static_cast<size_t>(n_clusters));
      for (auto& c : centers) c = {rng.uniform(0.0, board), rng.uniform(0.0, board)};
      if (cvrp) inst.coords.push_back({rng.uniform(0.0, board), rng.uniform(0.0, board)});
      for (int i = 0; i < customers; ++i) {
        const auto& c = centers[static_cast<size_t>(rng.uniform_int(0, n_clusters - 1))];
        inst.coords.push_back({c[0] + rng.normal(0.0, 1.0), c[1] + rng.normal(0.0, 1.0)});
      }
      inst.meta["clusters"] = n_clusters;
      inst.meta["board"] = board;
      break;
    }
    case Dist::kExplosion:
    case Dist::kImplosion: {
      if (cvrp) inst.coords.push_back({rng.uniform(), rng.uniform()});
      for (int i = 0; i < customers; ++i)
        inst.coords.push_back({rng.uniform(), rng.uniform()});
      const Vec2 center{rng.uniform(), rng.uniform()};
      const double radius = rng.uniform(params.r_min, params.r_max);
      int inside_before = 0;
      for (size_t i = first_customer; i < inst.coords.size(); ++i) {
        Vec2& p = inst.coords[i];
        const double r = dist(p, center);
        if (r >= radius) continue;
        ++inside_before;
        double ux, uy;
        if (r > 0.0) {
          ux = (p[0] - center[0]) / r;
          uy = (p[1] - center[1]) / r;
        } else {
          const double a = rng.uniform(0.0, 6.283185307179586476925286766559);
          ux = std::cos(a);
          uy = std::sin(a);
        }
        if (params.distribution == Dist::kExplosion) {
          const double r_new = radius + rng.exponential(params.lambda);
          p = {center[0] + ux * r_new, center[1] + uy * r_new};
        } else {
          const double m = rng.truncated_normal(1.0, 1.0, 1.0);
          p = {center[0] + ux * (r / m), center[1] + uy * (r / m)};
        }
      }
      inst.meta["disc_center"] = {center[0], center[1]};
      inst.meta["disc_radius"] = radius;
      inst.meta["inside_before"] = inside_before;
      break;
    }
  }

  const Frame f = rescale_frame(inst.coords);
  apply_frame(inst.coords, f);
  if (inst.meta.contains("disc_center")) {
    // keep the recorded disc in the instance's final coordinate frame
    const double cx = inst.meta["disc_center"][0].get<double>();
    const double cy = inst.meta["disc_center"][1].get<double>();
    inst.meta["disc_center"] = {(cx - f.min_x) * f.scale, (cy - f.min_y) * f.scale};
    inst.meta["disc_radius"] = inst.meta["disc_radius"].get<double>() * f.scale;
  }

  if (cvrp) {
    inst.depot = 0;
    inst.capacity = params.capacity;
    inst.demands.assign(inst.coords.size(), 0);
    for (size_t i = 1; i < inst.coords.size(); ++i)
      inst.demands[i] = static_cast<int>(rng.uniform_int(params.demand_lo, params.demand_hi));
  }
  inst.validate();
  return inst;
}

double tour_cost(const Instance& inst, const std::vector<int>& tour) {
  const int n = inst.n();
  if (tour.size() < 2) throw InputError("tour needs at least 2 indices");
  std::vector<int> visits(static_cast<size_t>(n), 0);
  for (int idx : tour) {
    if (idx < 0 || idx >= n)
      throw InputError("tour index out of range: " + std::to_string(idx));
    ++visits[static_cast<size_t>(idx)];
  }
  for (int i = 0; i < n; ++i) {
    if (inst.kind == Kind::kCvrp && i == inst.depot) continue;
    if (visits[static_cast<size_t>(i)] == 0)
      throw InputError("tour skips node " + std::to_string(i));
    if (visits[static_cast<size_t>(i)] > 1)
      throw InputError("tour visits node " + std::to_string(i) + " more than once");
  }

  // Sum edge lengths in sorted order so rotations and reversals of the same
  // cycle produce bit-identical costs.
  std::vector<double> edges;
  edges.reserve(tour.size());
  for (size_t k = 0; k < tour.size(); ++k) {
    const auto& a = inst.coords[static_cast<size_t>(tour[k])];
    const auto& b = inst.coords[static_cast<size_t>(tour[(k + 1) % tour.size()])];
    edges.push_back(dist(a, b));
  }
  std::sort(edges.begin(), edges.end());
  double total = 0.0;
  for (double e : edges) total += e;
  return total;
}

void check_capacity(const Instance& inst, const std::vector<int>& tour) {
  if (inst.kind != Kind::kCvrp) return;
  // Rotate to the first depot occurrence so cyclic trips are scanned whole.
  size_t start = 0;
  bool has_depot = false;
  for (size_t k = 0; k < tour.size(); ++k) {
    if (tour[k] == inst.depot) {
      start = k;
      has_depot = true;
      break;
    }
  }
  long load = 0;
  for (size_t k = 0; k < tour.size(); ++k) {
    const int idx = tour[has_depot ? (start + k) % tour.size() : k];
    if (idx == inst.depot) {
      load = 0;
      continue;
    }
    load += inst.demands[static_cast<size_t>(idx)];
    if (load > inst.capacity)
      throw InputError("capacity exceeded in trip at tour position " + std::to_string(k));
  }
}

namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

/// Splits "KEY : VALUE" tsplib header lines; returns false for section names.
bool split_header(const std::string& line, std::string& key, std::string& value) {
  const size_t colon = line.find(':');
  if (colon == std::string::npos) return false;
  key = strip(line.substr(0, colon));
  value = strip(line.substr(colon + 1));
  return !key.empty();
}

}  // namespace

Instance parse_tsplib(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int dimension = -1;
  std::string weight_type;
  std::string name;
  Instance inst;
  inst.kind = Kind::kTsp;

  auto parse_coords = [&](std::istringstream& stream) {
    if (dimension <= 0) throw InputError("tsplib: NODE_COORD_SECTION before DIMENSION");
    inst.coords.assign(static_cast<size_t>(dimension), {0.0, 0.0});
    std::vector<bool> seen(static_cast<size_t>(dimension), false);
    for (int k = 0; k < dimension; ++k) {
      if (!std::getline(stream, line))
        throw InputError("tsplib: unexpected end of file in NODE_COORD_SECTION");
      ++line_no;
      std::istringstream ls(line);
      int id;
      double x, y;
      if (!(ls >> id >> x >> y))
        throw InputError("tsplib: malformed coordinate at line " + std::to_string(line_no));
      if (id < 1 || id > dimension)
        throw InputError("tsplib: node id out of range at line " + std::to_string(line_no));
      if (seen[static_cast<size_t>(id - 1)])
        throw InputError("tsplib: duplicate node id at line " + std::to_string(line_no));
      seen[static_cast<size_t>(id - 1)] = true;
      inst.coords[static_cast<size_t>(id - 1)] = {x, y};
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = strip(line);
    if (t.empty() || t == "EOF") continue;
    std::string key, value;
    if (split_header(t, key, value)) {
      if (key == "DIMENSION") dimension = std::stoi(value);
      else if (key == "EDGE_WEIGHT_TYPE") weight_type = value;
      else if (key == "NAME") name = value;
      continue;
    }
    if (t == "NODE_COORD_SECTION") {
      if (weight_type != "EUC_2D")
        throw InputError("tsplib: unsupported EDGE_WEIGHT_TYPE '" + weight_type + "'");
      parse_coords(in);
    }
    // other sections (DISPLAY_DATA_SECTION etc.) are ignored
  }
  if (inst.coords.empty()) throw InputError("tsplib: missing NODE_COORD_SECTION");
  if (!name.empty()) inst.meta["name"] = name;
  inst.meta["source"] = "tsplib";
  inst.validate();
  return inst;
}

Instance parse_cvrplib(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int dimension = -1;
  int capacity = -1;
  std::string weight_type = "EUC_2D";  // Set-X files always declare EUC_2D
  std::string name;
  Instance inst;
  inst.kind = Kind::kCvrp;
  std::vector<int> demands;
  int depot = -1;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = strip(line);
    if (t.empty() || t == "EOF") continue;
    std::string key, value;
    if (split_header(t, key, value)) {
      if (key == "DIMENSION") dimension = std::stoi(value);
      else if (key == "CAPACITY") capacity = std::stoi(value);
      else if (key == "EDGE_WEIGHT_TYPE") weight_type = value;
      else if (key == "NAME") name = value;
      continue;
    }
    if (t == "NODE_COORD_SECTION") {
      if (dimension <= 0) throw InputError("cvrplib: NODE_COORD_SECTION before DIMENSION");
      if (weight_type != "EUC_2D")
        throw InputError("cvrplib: unsupported EDGE_WEIGHT_TYPE '" + weight_type + "'");
      inst.coords.assign(static_cast<size_t>(dimension), {0.0, 0.0});
      for (int k = 0; k < dimension; ++k) {
        if (!std::getline(in, line))
          throw InputError("cvrplib: unexpected end of file in NODE_COORD_SECTION");
        ++line_no;
        std::istringstream ls(line);
        int id;
        double x, y;
        if (!(ls >> id >> x >> y))
          throw InputError("cvrplib: malformed coordinate at line " + std::to_string(line_no));
        if (id < 1 || id > dimension)
          throw InputError("cvrplib: node id out of range at line " + std::to_string(line_no));
        inst.coords[static_cast<size_t>(id - 1)] = {x, y};
      }
    } else if (t == "DEMAND_SECTION") {
      if (dimension <= 0) throw InputError("cvrplib: DEMAND_SECTION before DIMENSION");
      demands.assign(static_cast<size_t>(dimension), 0);
      for (int k = 0; k < dimension; ++k) {
        if (!std::getline(in, line))
          throw InputError("cvrplib: unexpected end of file in DEMAND_SECTION");
        ++line_no;
        std::istringstream ls(line);
        int id, d;
        if (!(ls >> id >> d))
          throw InputError("cvrplib: malformed demand at line " + std::to_string(line_no));
        if (id < 1 || id > dimension)
          throw InputError("cvrplib: node id out of range at line " + std::to_string(line_no));
        demands[static_cast<size_t>(id - 1)] = d;
      }
    } else if (t == "DEPOT_SECTION") {
      while (std::getline(in, line)) {
        ++line_no;
        const std::string d = strip(line);
        if (d.empty()) continue;
        const int id = std::stoi(d);
        if (id == -1) break;
        if (depot >= 0) throw InputError("cvrplib: multiple depots are not supported");
        depot = id - 1;
      }
    }
  }

  if (inst.coords.empty()) throw InputError("cvrplib: missing NODE_COORD_SECTION");
  if (demands.empty()) throw InputError("cvrplib: missing DEMAND_SECTION");
  if (depot < 0) throw InputError("cvrplib: missing DEPOT_SECTION");
  if (capacity <= 0) throw InputError("cvrplib: missing CAPACITY");
  if (depot >= dimension) throw InputError("cvrplib: depot index out of range");
  if (demands[static_cast<size_t>(depot)] != 0) {
    log::warn("cvrplib: depot demand normalized to 0");
    demands[static_cast<size_t>(depot)] = 0;
  }
  for (int i = 0; i < dimension; ++i) {
    if (i == depot) continue;
    if (demands[static_cast<size_t>(i)] > capacity)
      throw InputError("cvrplib: demand at node " + std::to_string(i) + " exceeds capacity");
  }
  inst.depot = depot;
  inst.capacity = capacity;
  inst.demands = std::move(demands);
  if (!name.empty()) inst.meta["name"] = name;
  inst.meta["source"] = "cvrplib";
  inst.validate();
  return inst;
}

nlohmann::json instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = kind_name(inst.kind);
  auto coords = nlohmann::json::array();
  for (const auto& c : inst.coords) coords.push_back({c[0], c[1]});
  j["coords"] = std::move(coords);
  if (inst.kind == Kind::kCvrp) {
    j["depot"] = inst.depot;
    j["demands"] = inst.demands;
    j["capacity"] = inst.capacity;
  }
  j["meta"] = inst.meta;
  return j;
}

Instance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("instance json: expected an object");
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw InputError("instance json: unsupported version");
  Instance inst;
  inst.kind = kind_from_name(j.at("kind").get<std::string>());
  for (const auto& c : j.at("coords")) {
    if (!c.is_array() || c.size() != 2)
      throw InputError("instance json: coords entries must be [x, y]");
    inst.coords.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (inst.kind == Kind::kCvrp) {
    inst.depot = j.at("depot").get<int>();
    inst.demands = j.at("demands").get<std::vector<int>>();
    inst.capacity = j.at("capacity").get<int>();
  }
  if (j.contains("meta")) inst.meta = j["meta"];
  inst.validate();
  return inst;
}

std::string save_instances(const std::vector<Instance>& batch) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& inst : batch) arr.push_back(instance_to_json(inst));
  return arr.dump(2) + "\n";
}

std::vector<Instance> load_instances(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("instance json: ") + e.what());
  }
  std::vector<Instance> out;
  if (j.is_array()) {
    for (const auto& item : j) out.push_back(instance_from_json(item));
  } else {
    out.push_back(instance_from_json(j));
  }
  return out;
}

}  // namespace invit
