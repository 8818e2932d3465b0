# Common numerical utilities package initialization