#include "treerl/tree_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "treerl/names.hpp"

namespace treerl {

using json = nlohmann::ordered_json;

namespace {

json params_to_json(const SearchParams& p) {
  json j;
  j["max_depth"] = p.max_depth;
  j["expansion_width"] = p.expansion_width;
  j["max_rollouts"] = p.max_rollouts;
  j["uct_lambda"] = p.uct_lambda;
  j["lambda1"] = p.lambda1;
  j["lambda2"] = p.lambda2;
  j["lambda3"] = p.lambda3;
  j["depth_bonus"] = to_string(p.depth_bonus_kind);
  j["gamma_min"] = p.gamma_min;
  j["selection_mode"] = to_string(p.selection_mode);
  j["backup_rule"] = to_string(p.backup_rule);
  if (p.early_stop_correct) j["early_stop_correct"] = *p.early_stop_correct;
  else j["early_stop_correct"] = nullptr;
  j["max_step_tokens"] = p.max_step_tokens;
  j["max_nodes"] = p.max_nodes;
  j["max_extracted_negatives"] = p.max_extracted_negatives;
  return j;
}

SearchParams params_from_json(const json& j) {
  SearchParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.expansion_width = j.at("expansion_width").get<int>();
  p.max_rollouts = j.at("max_rollouts").get<int>();
  p.uct_lambda = j.at("uct_lambda").get<double>();
  p.lambda1 = j.at("lambda1").get<double>();
  p.lambda2 = j.at("lambda2").get<double>();
  p.lambda3 = j.at("lambda3").get<double>();
  p.depth_bonus_kind = depth_bonus_from(j.at("depth_bonus").get<std::string>());
  p.gamma_min = j.at("gamma_min").get<double>();
  p.selection_mode = selection_mode_from(j.at("selection_mode").get<std::string>());
  p.backup_rule = backup_rule_from(j.at("backup_rule").get<std::string>());
  if (!j.at("early_stop_correct").is_null())
    p.early_stop_correct = j.at("early_stop_correct").get<int>();
  p.max_step_tokens = j.at("max_step_tokens").get<int>();
  p.max_nodes = j.at("max_nodes").get<int>();
  p.max_extracted_negatives = j.value("max_extracted_negatives", 4);
  return p;
}

json problem_to_json(const Problem& p) {
  return json{{"id", p.id},
              {"start_value", p.start_value},
              {"target_value", p.target_value},
              {"op_budget", p.op_budget},
              {"difficulty", p.difficulty}};
}

Problem problem_from_json(const json& j) {
  Problem p;
  p.id = j.at("id").get<std::string>();
  p.start_value = j.at("start_value").get<std::int64_t>();
  p.target_value = j.at("target_value").get<std::int64_t>();
  p.op_budget = j.at("op_budget").get<int>();
  p.difficulty = j.at("difficulty").get<int>();
  return p;
}

}  // namespace

std::string tree_to_json(const SearchTree& tree, const VocabularySpec* vocab) {
  json doc;
  doc["format_version"] = 1;
  doc["problem"] = problem_to_json(tree.problem);
  doc["params"] = params_to_json(tree.params);
  doc["answer_marker"] = tree.answer_marker;
  if (vocab) {
    json names = json::array();
    for (Token t = 0; t < vocab->size(); ++t) names.push_back(vocab->token_name(t));
    doc["token_names"] = std::move(names);
  }
  doc["rollout_count"] = tree.rollout_count;
  doc["iterations"] = tree.iterations;
  if (tree.first_correct_iteration) doc["first_correct_iteration"] = *tree.first_correct_iteration;
  else doc["first_correct_iteration"] = nullptr;
  json nodes = json::array();
  for (NodeId id = 0; id < tree.size(); ++id) {
    const Node& n = tree.node(id);
    json rec;
    rec["id"] = id;
    if (n.parent) rec["parent"] = *n.parent;
    else rec["parent"] = nullptr;
    rec["depth"] = n.depth;
    rec["status"] = to_string(n.status);
    rec["q"] = n.q_value;
    rec["visits"] = n.visit_count;
    rec["entropy"] = n.step_entropy;
    rec["tokens"] = n.step_tokens;
    nodes.push_back(std::move(rec));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2);
}

void save_tree(const std::string& path, const SearchTree& tree,
               const VocabularySpec* vocab) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open tree dump for writing: " + path);
  out << tree_to_json(tree, vocab) << "\n";
}

LoadedTree tree_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("tree dump parse error at byte " + std::to_string(e.byte) +
                      ": " + e.what());
  }
  if (doc.value("format_version", 0) != 1)
    throw ConfigError("unsupported tree dump format_version");
  LoadedTree loaded;
  SearchTree& tree = loaded.tree;
  tree.problem = problem_from_json(doc.at("problem"));
  tree.params = params_from_json(doc.at("params"));
  tree.answer_marker = doc.at("answer_marker").get<Token>();
  tree.rollout_count = doc.at("rollout_count").get<int>();
  tree.iterations = doc.value("iterations", 0);
  if (doc.contains("first_correct_iteration") && !doc.at("first_correct_iteration").is_null())
    tree.first_correct_iteration = doc.at("first_correct_iteration").get<int>();
  if (doc.contains("token_names"))
    loaded.token_names = doc.at("token_names").get<std::vector<std::string>>();

  const auto& nodes = doc.at("nodes");
  tree.nodes.resize(nodes.size());
  for (const auto& rec : nodes) {
    const NodeId id = rec.at("id").get<NodeId>();
    if (id >= tree.size()) throw ConfigError("tree dump: node id out of range");
    Node& n = tree.node(id);
    if (!rec.at("parent").is_null()) {
      n.parent = rec.at("parent").get<NodeId>();
      if (*n.parent >= tree.size()) throw ConfigError("tree dump: parent id out of range");
    }
    n.depth = rec.at("depth").get<int>();
    n.status = node_status_from(rec.at("status").get<std::string>());
    n.q_value = rec.at("q").get<double>();
    n.visit_count = rec.at("visits").get<int>();
    n.step_entropy = rec.at("entropy").get<double>();
    n.step_tokens = rec.at("tokens").get<std::vector<Token>>();
  }
  // Rebuild children lists and the terminal index from parent links.
  for (NodeId id = 0; id < tree.size(); ++id) {
    const Node& n = tree.node(id);
    if (n.parent) tree.node(*n.parent).children.push_back(id);
    if (is_terminal(n.status)) tree.terminal_ids.push_back(id);
  }
  return loaded;
}

LoadedTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tree dump: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return tree_from_json(buffer.str());
}

}  // namespace treerl
