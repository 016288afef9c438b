#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "vvgen/error.hpp"
#include "vvgen/spec_corpus.hpp"

using namespace vvgen;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vvgen::Error thrown";
  return ErrorCode::InvalidParams;
}

}  // namespace

TEST(ParseToc, KeysDepthAndChapter) {
  const std::string text = "2.5 Compute Constructs\nbody\n2.5.1 Parallel Construct\nmore\n";
  const auto toc = parse_toc(text);
  ASSERT_EQ(toc.size(), 2u);
  EXPECT_EQ(toc[0].key, "2.5");
  EXPECT_EQ(toc[0].depth, 2);
  EXPECT_EQ(toc[0].chapter, 2);
  EXPECT_EQ(toc[0].title, "Compute Constructs");
  EXPECT_EQ(toc[0].char_offset, 0u);
  EXPECT_EQ(toc[1].key, "2.5.1");
  EXPECT_EQ(toc[1].depth, 3);
  EXPECT_EQ(toc[1].char_offset, text.find("2.5.1"));
}

TEST(ParseToc, EmptyTextHasNoHeadings) {
  EXPECT_EQ(code_of([] { parse_toc(""); }), ErrorCode::NoHeadingsFound);
  EXPECT_EQ(code_of([] { parse_toc("no numbered lines here\n"); }), ErrorCode::NoHeadingsFound);
}

TEST(ParseToc, DuplicateKeyRejected) {
  try {
    parse_toc("3.1 First\nx\n3.1 Again\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateKey);
    EXPECT_EQ(e.detail(), "3.1");
  }
}

TEST(ParseToc, CustomPattern) {
  HeadingPattern p;
  p.regex = R"(^Section (\d+(?:\.\d+)*): (.+)$)";
  const auto toc = parse_toc("Section 4.2: Loops\ntext\nSection 4.3: Data\n", p);
  ASSERT_EQ(toc.size(), 2u);
  EXPECT_EQ(toc[1].key, "4.3");
  EXPECT_EQ(toc[1].title, "Data");
}

TEST(SliceSections, TwoHeadingsSpanArithmetic) {
  std::string text = "1 A\n";
  text.resize(100, 'a');
  text.back() = '\n';
  text += "2 B\n";
  text.resize(300, 'b');
  const auto index = slice_sections(text, parse_toc(text));
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index.sections()[0].span, (Span{0, 100}));
  EXPECT_EQ(index.sections()[1].span, (Span{100, 300}));
  EXPECT_EQ(index.sections()[0].body, text.substr(4, 96));
  EXPECT_EQ(index.sections()[1].body, text.substr(104));
}

TEST(SliceSections, SingleHeadingRunsToEnd) {
  const std::string text = "7 Only\nline one\nline two";
  const auto index = slice_sections(text, parse_toc(text));
  ASSERT_EQ(index.size(), 1u);
  EXPECT_EQ(index.sections()[0].span.end, text.size());
  EXPECT_EQ(index.sections()[0].body, "line one\nline two");
}

TEST(SliceSections, OffsetBeyondText) {
  std::vector<TocEntry> toc{{"1", "A", 1, 1, 0}, {"2", "B", 2, 1, 50}};
  EXPECT_EQ(code_of([&] { slice_sections("short text", toc); }), ErrorCode::OffsetOutOfRange);
}

TEST(Lookup, ByKeyAndTitle) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  const auto& s = lookup_section(index, "2.5.1");
  EXPECT_EQ(s.title, "Parallel Construct");
  EXPECT_EQ(&lookup_section(index, "parallel construct"), &s);
  EXPECT_EQ(code_of([&] { lookup_section(index, "9.9"); }), ErrorCode::UnknownKey);
}

TEST(Lookup, TreeQueries) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  EXPECT_FALSE(index.is_leaf("2.5"));
  EXPECT_TRUE(index.is_leaf("2.5.1"));
  ASSERT_NE(index.parent("2.5.10"), nullptr);
  EXPECT_EQ(index.parent("2.5.10")->key, "2.5");
  EXPECT_EQ(index.parent("2"), nullptr);
}

TEST(ExportImport, DocumentOrderAndRoundTrip) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  const auto json = export_spec_json(index);
  const auto parsed = Json::parse(json);
  std::vector<std::string> keys;
  for (const auto& [k, _] : parsed.items()) keys.push_back(k);
  ASSERT_EQ(keys.size(), index.size());
  for (std::size_t i = 0; i < keys.size(); ++i) EXPECT_EQ(keys[i], index.sections()[i].key);

  const auto back = import_spec_json(json);
  EXPECT_TRUE(same_content(index, back));
  EXPECT_EQ(lookup_section(back, "2.5.10").body, lookup_section(index, "2.5.10").body);
  EXPECT_FALSE(back.has_spans());

  const auto with_toc = import_spec_json(json, export_toc_json(index));
  EXPECT_TRUE(with_toc.has_spans());
  EXPECT_EQ(lookup_section(with_toc, "2.5.1").title, "Parallel Construct");
  EXPECT_EQ(lookup_section(with_toc, "2.5.1").span, lookup_section(index, "2.5.1").span);
}

TEST(ExportImport, SingleSectionObject) {
  const auto index = slice_sections("2.5.1 Parallel\nx\n", parse_toc("2.5.1 Parallel\nx\n"));
  const auto j = Json::parse(export_spec_json(index));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j["2.5.1"], "x\n");
}

TEST(LoadSpecIndex, TextAndJsonWithCompanion) {
  fixtures::TempDir dir;
  const auto text = fixtures::sample_spec_text();
  write_file(dir / "spec.txt", text);
  const auto from_text = load_spec_index(dir / "spec.txt");
  write_file(dir / "spec.json", export_spec_json(from_text));
  write_file(toc_companion_path(dir / "spec.json"), export_toc_json(from_text));
  EXPECT_EQ(toc_companion_path(dir / "spec.json").filename(), "spec.toc.json");
  const auto from_json = load_spec_index(dir / "spec.json");
  EXPECT_TRUE(same_content(from_text, from_json));
  EXPECT_EQ(from_json.source_digest(), from_text.source_digest());
  EXPECT_EQ(lookup_section(from_json, "3.2.1").title, "acc_get_num_devices");
}

// Random documents: spans tile the text from the first heading on, and every key is retrievable.
TEST(SliceSections, PropertySpansPartitionText) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    if (rng() % 2) text += "front matter\n";
    std::vector<int> path{1};
    const int n = 1 + static_cast<int>(rng() % 20);
    std::vector<std::string> keys;
    for (int i = 0; i < n; ++i) {
      if (i > 0) {
        const auto move = rng() % 3;
        if (move == 0 && path.size() < 4) {
          path.push_back(1);
        } else if (move == 1 && path.size() > 1) {
          path.pop_back();
          ++path.back();
        } else {
          ++path.back();
        }
      }
      std::string key;
      for (std::size_t d = 0; d < path.size(); ++d) key += (d ? "." : "") + std::to_string(path[d]);
      keys.push_back(key);
      text += key + " Title " + std::to_string(i) + "\n";
      const auto lines = rng() % 4;
      for (unsigned l = 0; l < lines; ++l) text += "lorem ipsum dolor " + std::to_string(rng() % 1000) + "\n";
    }
    const auto toc = parse_toc(text);
    ASSERT_EQ(toc.size(), keys.size());
    const auto index = slice_sections(text, toc);
    const auto again = slice_sections(text, parse_toc(text));
    EXPECT_EQ(index.source_digest(), again.source_digest());
    std::size_t cursor = toc.front().char_offset;
    for (const auto& s : index.sections()) {
      EXPECT_EQ(s.span.start, cursor);
      EXPECT_GT(s.span.end, s.span.start);
      cursor = s.span.end;
      const auto heading_end = text.find('\n', s.span.start) + 1;
      EXPECT_EQ(text.substr(s.span.start, heading_end - s.span.start) + s.body,
                text.substr(s.span.start, s.span.end - s.span.start));
    }
    EXPECT_EQ(cursor, text.size());
    for (const auto& k : keys) EXPECT_EQ(lookup_section(index, k).key, k);
  }
}
