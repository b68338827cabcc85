#pragma once

#include <optional>
#include <string>

#include "treerl/tree.hpp"
#include "treerl/vocab.hpp"

namespace treerl {

/// Versioned single-object tree dump. Token names are embedded when a
/// vocabulary is supplied so dumps are readable on their own.
void save_tree(const std::string& path, const SearchTree& tree,
               const VocabularySpec* vocab = nullptr);

std::string tree_to_json(const SearchTree& tree,
                         const VocabularySpec* vocab = nullptr);

struct LoadedTree {
  SearchTree tree;
  std::vector<std::string> token_names;  // empty if the dump had none
};

/// Parse errors carry the byte offset of the failure.
LoadedTree load_tree(const std::string& path);
LoadedTree tree_from_json(const std::string& text);

}  // namespace treerl
