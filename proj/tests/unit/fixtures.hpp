#pragma once

#include <string>

#include "vfscan/corpus.hpp"

namespace fixtures {

// Two files, two hunks each, every hunk one removed and one added line.
inline vfscan::Commit fig4_commit(std::string id = "fig4", bool label = true) {
  vfscan::Commit c;
  c.id = std::move(id);
  c.project = "demo";
  c.timestamp = 1000;
  c.label = label;
  c.files = {
      {"src/A.java", {{{"int a = 0;"}, {"int a = 1;"}, std::nullopt}, {{"return a;"}, {"return check(a);"}, std::nullopt}}},
      {"src/B.java", {{{"b.free();"}, {"if (b) b.free();"}, std::nullopt}, {{"log(b);"}, {"log(sanitize(b));"}, std::nullopt}}},
  };
  return c;
}

inline const char* kFig4Diff = R"(diff --git a/src/A.java b/src/A.java
index 1111111..2222222 100644
--- a/src/A.java
+++ b/src/A.java
@@ -1,3 +1,3 @@ class A {
 // context
-int a = 0;
+int a = 1;
 // more context
@@ -10,2 +10,2 @@
-return a;
+return check(a);
 }
diff --git a/src/B.java b/src/B.java
--- a/src/B.java
+++ b/src/B.java
@@ -5 +5 @@
-b.free();
+if (b) b.free();
@@ -20,2 +20,2 @@
-log(b);
+log(sanitize(b));
\ No newline at end of file
 tail
)";

}  // namespace fixtures
