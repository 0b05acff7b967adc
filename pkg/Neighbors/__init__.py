# Neighbors package
