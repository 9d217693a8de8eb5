// SPDX-License-Identifier: Apache-2.0
// Microservice vulnerability taxonomy and keyword-rule tagging.
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vulnrisk::taxonomy {

enum class Level { Root, Category, Class, Leaf };

std::string_view level_name(Level level) noexcept;

struct TaxonomyNode {
    std::string id;
    std::string name;
    std::string parent;  ///< empty for the root
    Level level = Level::Leaf;

    friend bool operator==(const TaxonomyNode&, const TaxonomyNode&) = default;
};

class Taxonomy {
public:
    /// `id|parent_id|level|name` per line. Throws Error(Schema) unless the
    /// lines form one tree whose levels step root -> category -> class -> leaf.
    static Taxonomy parse(std::string_view text);
    /// The tree shipped in data/taxonomy-v1.txt.
    static const Taxonomy& builtin();

    [[nodiscard]] const std::vector<TaxonomyNode>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const TaxonomyNode& root() const { return nodes_.front(); }
    [[nodiscard]] const TaxonomyNode* find(std::string_view id) const noexcept;
    [[nodiscard]] const TaxonomyNode* find_by_name(std::string_view name) const noexcept;
    [[nodiscard]] std::vector<const TaxonomyNode*> children(std::string_view id) const;
    /// Nearest ancestor (or the node itself) at `level`; nullptr if none.
    [[nodiscard]] const TaxonomyNode* ancestor_at(std::string_view id, Level level) const;

private:
    std::vector<TaxonomyNode> nodes_;  // root first, then file order
};

struct TagRule {
    std::vector<std::vector<std::string>> phrases;  ///< every phrase must occur
    std::string node_id;
};

class Tagger {
public:
    /// `keyword[, keyword...] -> node_id` per line. Throws Error(Schema) for
    /// malformed lines or unknown node ids.
    static Tagger parse(std::string_view rules, const Taxonomy& taxonomy);
    /// Builtin rules over the builtin taxonomy.
    static const Tagger& builtin();

    /// Matched nodes, deduplicated, in taxonomy order. Case-insensitive.
    [[nodiscard]] std::vector<TaxonomyNode> tag(std::string_view description) const;
    [[nodiscard]] const std::vector<TagRule>& rules() const noexcept { return rules_; }

private:
    Taxonomy taxonomy_;
    std::vector<TagRule> rules_;
};

}  // namespace vulnrisk::taxonomy
