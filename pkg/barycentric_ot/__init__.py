# Barycentric weak optimal transport toolkit
