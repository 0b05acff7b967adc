# Data package
